//! The reduced C1 virtual element space: three DOFs per vertex
//! `(v, h_V d_x v, h_V d_y v)`, cubic traces and linear normal derivatives
//! on every edge, and quadratic projectors for the H2, H1 and L2 forms.

mod global;

use nalgebra::{DMatrix, DVector, Matrix2};

pub use global::{C1Discretization, C1Errors, FormKind};

use crate::mesh::Polygon;
use crate::poly_basis::{edge_quadrature, polygon_quadrature, BasisKind, CellBasis, EdgeTraceMap};
use crate::vem_h1::{solve_checked, solve_spd};
use crate::Result;

#[derive(Clone, Debug)]
pub struct C1LocalSpace {
    cell: Polygon,
    basis: CellBasis,
    value_map: EdgeTraceMap,
    normal_map: EdgeTraceMap,
    gram: DMatrix<f64>,
    hessian_gram: DMatrix<f64>,
    grad_gram: DMatrix<f64>,
    dof_matrix: DMatrix<f64>,
    pi_delta: DMatrix<f64>,
    pi_nabla: DMatrix<f64>,
    pi0: DMatrix<f64>,
    a_delta: DMatrix<f64>,
    a_nabla: DMatrix<f64>,
    a_zero: DMatrix<f64>,
}

impl C1LocalSpace {
    pub fn new(cell: &Polygon) -> Result<Self> {
        let n = cell.n();
        let basis = CellBasis::new(cell, 2, BasisKind::Monomial)?;
        let nk = basis.dim();
        let mut s = Self {
            cell: cell.clone(),
            basis,
            // cubic Hermite trace; linear normal derivative
            value_map: EdgeTraceMap::new(3, true, 0),
            normal_map: EdgeTraceMap::new(1, false, 0),
            gram: DMatrix::zeros(nk, nk),
            hessian_gram: DMatrix::zeros(nk, nk),
            grad_gram: DMatrix::zeros(nk, nk),
            dof_matrix: DMatrix::zeros(3 * n, nk),
            pi_delta: DMatrix::zeros(0, 0),
            pi_nabla: DMatrix::zeros(0, 0),
            pi0: DMatrix::zeros(0, 0),
            a_delta: DMatrix::zeros(0, 0),
            a_nabla: DMatrix::zeros(0, 0),
            a_zero: DMatrix::zeros(0, 0),
        };
        let quad = polygon_quadrature(cell, 4)?;
        for (&x, &w) in quad.points.iter().zip(&quad.weights) {
            let v = s.basis.eval(x);
            let (dx, dy) = (s.basis.derivative((1, 0), x), s.basis.derivative((0, 1), x));
            s.gram += w * &v * v.transpose();
            s.grad_gram += w * (&dx * dx.transpose() + &dy * dy.transpose());
        }
        let hess: Vec<Matrix2<f64>> = (0..nk).map(|a| s.basis_hessian(a)).collect();
        for a in 0..nk {
            for b in 0..nk {
                s.hessian_gram[(a, b)] = cell.area() * hess[a].component_mul(&hess[b]).sum();
            }
        }
        for i in 0..n {
            let x = cell.vertex(i);
            let hv = cell.vertex_h(i);
            s.dof_matrix.row_mut(3 * i).copy_from(&s.basis.eval(x).transpose());
            s.dof_matrix.row_mut(3 * i + 1).copy_from(&(hv * s.basis.derivative((1, 0), x)).transpose());
            s.dof_matrix.row_mut(3 * i + 2).copy_from(&(hv * s.basis.derivative((0, 1), x)).transpose());
        }
        s.build_projectors(&hess)?;
        s.build_forms();
        Ok(s)
    }

    fn basis_hessian(&self, a: usize) -> Matrix2<f64> {
        // second derivatives of quadratics are constant
        let c = self.cell.centroid();
        let xy = self.basis.derivative((1, 1), c)[a];
        Matrix2::new(self.basis.derivative((2, 0), c)[a], xy, xy, self.basis.derivative((0, 2), c)[a])
    }

    fn build_projectors(&mut self, hess: &[Matrix2<f64>]) -> Result<()> {
        let n = self.cell.n();
        let nk = self.basis.dim();
        let ndof = 3 * n;

        // Hessian projector: boundary integral of grad v . (H_q n), kernel
        // fixed through the vertex-value products with 1, x, y
        let mut g = self.hessian_gram.clone();
        let mut b = DMatrix::zeros(nk, ndof);
        for i in 0..n {
            let (p0, p1) = self.cell.edge(i);
            let (nu, tau) = (self.cell.normal(i), self.cell.tangent(i));
            let rule = edge_quadrature(p0, p1, 4);
            for (q, &w) in rule.weights.iter().enumerate() {
                let t = rule.params[q];
                let dn = self.normal_derivative_row(i, t);
                let dt = self.tangential_derivative_row(i, t);
                for a in 3..nk {
                    let hn = hess[a] * nu;
                    let mut row = b.row_mut(a);
                    row += (w * nu.dot(&hn)) * dn.transpose() + (w * tau.dot(&hn)) * dt.transpose();
                }
            }
        }
        for a in 0..3 {
            g.row_mut(a).fill(0.0);
            for i in 0..n {
                let m = self.basis.eval(self.cell.vertex(i));
                let mut row = g.row_mut(a);
                row += m[a] * m.transpose();
                b[(a, 3 * i)] = m[a];
            }
        }
        self.pi_delta = solve_checked(&g, &b, &self.cell)?;

        // the enhancement makes the quadratic moments of v those of Pi_delta v
        let moments = &self.gram * &self.pi_delta;
        self.pi0 = solve_spd(&self.gram, &moments, &self.cell)?;

        // gradient projector: -int v lap q + int_dP v d_n q, mean fixed
        let mut g = self.grad_gram.clone();
        let mut b = DMatrix::zeros(nk, ndof);
        let mean = moments.row(0).into_owned();
        for a in 1..nk {
            let lap = hess[a].trace();
            let mut row = b.row_mut(a);
            row -= lap * &mean;
        }
        for i in 0..n {
            let (p0, p1) = self.cell.edge(i);
            let nu = self.cell.normal(i);
            let rule = edge_quadrature(p0, p1, 4);
            for (q, (&x, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let val = self.value_row(i, rule.params[q]);
                let dn = self.basis.derivative((1, 0), x) * nu.x + self.basis.derivative((0, 1), x) * nu.y;
                for a in 1..nk {
                    let mut row = b.row_mut(a);
                    row += (w * dn[a]) * val.transpose();
                }
            }
        }
        g.row_mut(0).copy_from(&self.gram.row(0));
        b.row_mut(0).copy_from(&mean);
        self.pi_nabla = solve_checked(&g, &b, &self.cell)?;
        Ok(())
    }

    fn build_forms(&mut self) {
        let ndof = self.ndof();
        let residual = |pi: &DMatrix<f64>| DMatrix::identity(ndof, ndof) - &self.dof_matrix * pi;
        // s_P is the Euclidean product of the scaled DOF vectors
        let form = |pi: &DMatrix<f64>, gram: &DMatrix<f64>, scale: f64| {
            let r = residual(pi);
            pi.transpose() * gram * pi + scale * r.transpose() * r
        };
        let h = self.cell.diameter();
        self.a_delta = form(&self.pi_delta, &self.hessian_gram, h.powi(-2));
        self.a_nabla = form(&self.pi_nabla, &self.grad_gram, 1.0);
        self.a_zero = form(&self.pi0, &self.gram, h * h);
    }

    pub fn cell(&self) -> &Polygon {
        &self.cell
    }

    pub fn ndof(&self) -> usize {
        3 * self.cell.n()
    }

    pub fn basis(&self) -> &CellBasis {
        &self.basis
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn hessian_gram(&self) -> &DMatrix<f64> {
        &self.hessian_gram
    }

    pub fn grad_gram(&self) -> &DMatrix<f64> {
        &self.grad_gram
    }

    pub fn dof_matrix(&self) -> &DMatrix<f64> {
        &self.dof_matrix
    }

    pub fn pi_delta(&self) -> &DMatrix<f64> {
        &self.pi_delta
    }

    pub fn pi_nabla(&self) -> &DMatrix<f64> {
        &self.pi_nabla
    }

    pub fn pi0(&self) -> &DMatrix<f64> {
        &self.pi0
    }

    /// Stabilized H2 form (scaled by h_P^-2 in the stabilization).
    pub fn a_delta(&self) -> &DMatrix<f64> {
        &self.a_delta
    }

    pub fn a_nabla(&self) -> &DMatrix<f64> {
        &self.a_nabla
    }

    /// Stabilized L2 form (scaled by h_P^2 in the stabilization).
    pub fn a_zero(&self) -> &DMatrix<f64> {
        &self.a_zero
    }

    /// Cell-averaged `phi'(z) = 3 z^2 - 1`, with `z^2` replaced by
    /// `|P|^-1 a0_h(z, z)`.
    pub fn phi_weight(&self, z: &DVector<f64>) -> f64 {
        3.0 / self.cell.area() * z.dot(&(&self.a_zero * z)) - 1.0
    }

    /// Local residual of the semilinear form: `w(u) A_nabla u`.
    pub fn semilinear_action(&self, u: &DVector<f64>) -> DVector<f64> {
        self.phi_weight(u) * (&self.a_nabla * u)
    }

    /// Derivative of `u -> w(u) A_nabla u`.
    pub fn semilinear_jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let grad_w = (6.0 / self.cell.area()) * (&self.a_zero * u);
        self.phi_weight(u) * &self.a_nabla + (&self.a_nabla * u) * grad_w.transpose()
    }

    /// Endpoint data of local edge `i`, as rows over the local DOFs. Row m
    /// of the value block is the m-th Hermite datum (values, then d/dt).
    fn hermite_data(&self, i: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.cell.n();
        let j = (i + 1) % n;
        let len = self.cell.edge_length(i);
        let (tau, nu) = (self.cell.tangent(i), self.cell.normal(i));
        let mut val = DMatrix::zeros(4, 3 * n);
        let mut nrm = DMatrix::zeros(2, 3 * n);
        for (e, v) in [i, j].into_iter().enumerate() {
            let hv = self.cell.vertex_h(v);
            val[(e, 3 * v)] = 1.0;
            val[(2 + e, 3 * v + 1)] = len * tau.x / hv;
            val[(2 + e, 3 * v + 2)] = len * tau.y / hv;
            nrm[(e, 3 * v + 1)] = nu.x / hv;
            nrm[(e, 3 * v + 2)] = nu.y / hv;
        }
        (val, nrm)
    }

    /// Trace of `v` on local edge `i` at t in [-1/2, 1/2] (t = -1/2 at vertex i).
    pub fn value_row(&self, i: usize, t: f64) -> DVector<f64> {
        self.hermite_data(i).0.tr_mul(&self.value_map.value_weights(t))
    }

    /// Derivative along the counterclockwise tangent.
    pub fn tangential_derivative_row(&self, i: usize, t: f64) -> DVector<f64> {
        self.hermite_data(i).0.tr_mul(&self.value_map.derivative_weights(t)) / self.cell.edge_length(i)
    }

    /// Outward normal derivative.
    pub fn normal_derivative_row(&self, i: usize, t: f64) -> DVector<f64> {
        self.hermite_data(i).1.tr_mul(&self.normal_map.value_weights(t))
    }
}
