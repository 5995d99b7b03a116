use nalgebra::{DMatrix, DVector};

use super::legendre_values;

/// Reconstruction of a polynomial trace of degree `degree` on an edge
/// parametrized by t in [-1/2, 1/2]. The trace is expanded in Legendre
/// polynomials L_j(2t) and determined by the data
/// `[v(-1/2), v(1/2), (v'(-1/2), v'(1/2),) m_0, .., m_{q-1}]` where
/// `m_j = int v L_j(2t) dt` and the derivatives (optional) are d/dt.
#[derive(Clone, Debug)]
pub struct EdgeTraceMap {
    degree: usize,
    with_derivatives: bool,
    n_moments: usize,
    /// data -> Legendre coefficients
    inverse: DMatrix<f64>,
}

impl EdgeTraceMap {
    pub fn new(degree: usize, with_derivatives: bool, n_moments: usize) -> Self {
        let n_data = 2 + if with_derivatives { 2 } else { 0 } + n_moments;
        assert_eq!(n_data, degree + 1, "trace data must determine a degree-{degree} polynomial");
        let m = degree + 1;
        let mut c = DMatrix::zeros(m, m);
        let mut row = 0;
        for s in [-1.0, 1.0] {
            let l = legendre_values(degree, s);
            for j in 0..m {
                c[(row, j)] = l[j];
            }
            row += 1;
        }
        if with_derivatives {
            for s in [-1.0f64, 1.0] {
                for j in 0..m {
                    // d/dt L_j(2t) = 2 L_j'(s), L_j'(+-1) = (+-1)^(j+1) j(j+1)/2
                    c[(row, j)] = s.powi(j as i32 + 1) * (j * (j + 1)) as f64;
                }
                row += 1;
            }
        }
        for q in 0..n_moments {
            c[(row, q)] = 1.0 / (2 * q + 1) as f64;
            row += 1;
        }
        let inverse = c.try_inverse().expect("trace data are unisolvent");
        Self { degree, with_derivatives, n_moments, inverse }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_data(&self) -> usize {
        self.degree + 1
    }

    pub fn has_derivatives(&self) -> bool {
        self.with_derivatives
    }

    pub fn n_moments(&self) -> usize {
        self.n_moments
    }

    /// Matrix mapping the data vector to Legendre coefficients.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn coefficients(&self, data: &DVector<f64>) -> DVector<f64> {
        &self.inverse * data
    }

    /// Row vector `w` with `v(t) = w . data`.
    pub fn value_weights(&self, t: f64) -> DVector<f64> {
        let l = DVector::from_vec(legendre_values(self.degree, 2.0 * t));
        self.inverse.tr_mul(&l)
    }

    /// Row vector `w` with `dv/dt(t) = w . data`.
    pub fn derivative_weights(&self, t: f64) -> DVector<f64> {
        let s = 2.0 * t;
        let l = legendre_values(self.degree, s);
        // L_j' via (1 - s^2) L_j' = j (L_{j-1} - s L_j), with the endpoint limits
        let dl = DVector::from_fn(self.degree + 1, |j, _| {
            if j == 0 {
                0.0
            } else if (1.0 - s * s).abs() < 1e-14 {
                s.signum().powi(j as i32 + 1) * (j * (j + 1)) as f64 / 2.0
            } else {
                j as f64 * (l[j - 1] - s * l[j]) / (1.0 - s * s)
            }
        });
        self.inverse.tr_mul(&(2.0 * dl))
    }
}
