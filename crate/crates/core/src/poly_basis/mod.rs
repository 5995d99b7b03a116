//! Scaled monomial bases, quadrature and polynomial projections on cells.

mod edge_trace;
mod quadrature;

use nalgebra::{DMatrix, DVector};

pub use edge_trace::EdgeTraceMap;
pub use quadrature::{
    ear_clip, edge_quadrature, gauss_legendre, legendre_values, polygon_quadrature, triangle_quadrature, EdgeRule, QuadratureRule,
};

use crate::mesh::Polygon;
use crate::Vec2;

#[derive(Debug, thiserror::Error)]
pub enum BasisError {
    #[error("derivatives of order {order} are not supported (at most 2)")]
    UnsupportedDerivative { order: usize },
    #[error("Gram matrix of degree {degree} is numerically singular on a cell of diameter {diameter:e}")]
    SingularGram { degree: usize, diameter: f64 },
    #[error("ear clipping failed to triangulate the polygon")]
    Triangulation,
}

/// Dimension of the polynomials of degree at most `l` in two variables
/// (zero for `l = -1`).
pub fn basis_dim(l: isize) -> usize {
    assert!(l >= -1, "polynomial degree must be at least -1");
    if l < 0 {
        0
    } else {
        let l = l as usize;
        (l + 1) * (l + 2) / 2
    }
}

/// Multi-indices of degree at most `l` in graded lexicographic order:
/// (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
pub fn multi_indices(l: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(basis_dim(l as isize));
    for d in 0..=l {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Position of a multi-index in the graded ordering.
pub fn multi_index_position(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

/// Monomials ((x - center) / scale)^alpha, |alpha| <= degree.
#[derive(Clone, Debug)]
pub struct ScaledMonomials {
    pub center: Vec2,
    pub scale: f64,
    pub degree: usize,
    indices: Vec<(usize, usize)>,
}

impl ScaledMonomials {
    pub fn new(center: Vec2, scale: f64, degree: usize) -> Self {
        Self { center, scale, degree, indices: multi_indices(degree) }
    }

    pub fn for_cell(cell: &Polygon, degree: usize) -> Self {
        Self::new(cell.centroid(), cell.diameter(), degree)
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    fn powers(&self, p: Vec2) -> (Vec<f64>, Vec<f64>) {
        let (xi, eta) = ((p.x - self.center.x) / self.scale, (p.y - self.center.y) / self.scale);
        let mut px = vec![1.0; self.degree + 1];
        let mut py = vec![1.0; self.degree + 1];
        for d in 1..=self.degree {
            px[d] = px[d - 1] * xi;
            py[d] = py[d - 1] * eta;
        }
        (px, py)
    }

    pub fn eval_into(&self, p: Vec2, out: &mut [f64]) {
        let (px, py) = self.powers(p);
        for (o, &(a, b)) in out.iter_mut().zip(&self.indices) {
            *o = px[a] * py[b];
        }
    }

    pub fn eval(&self, p: Vec2) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        self.eval_into(p, v.as_mut_slice());
        v
    }

    /// D^alpha of every member at `p`, any order.
    pub fn derivative_into(&self, alpha: (usize, usize), p: Vec2, out: &mut [f64]) {
        let (px, py) = self.powers(p);
        let inv = self.scale.powi(-((alpha.0 + alpha.1) as i32));
        for (o, &(a, b)) in out.iter_mut().zip(&self.indices) {
            *o = if a < alpha.0 || b < alpha.1 {
                0.0
            } else {
                falling(a, alpha.0) * falling(b, alpha.1) * inv * px[a - alpha.0] * py[b - alpha.1]
            };
        }
    }

    /// Gradient of every member at `p`.
    pub fn gradient(&self, p: Vec2) -> (DVector<f64>, DVector<f64>) {
        let mut gx = DVector::zeros(self.dim());
        let mut gy = DVector::zeros(self.dim());
        self.derivative_into((1, 0), p, gx.as_mut_slice());
        self.derivative_into((0, 1), p, gy.as_mut_slice());
        (gx, gy)
    }
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

/// Values of the scaled monomials of degree `l` of `cell` at `points`
/// (one row per point).
pub fn eval_basis(cell: &Polygon, l: usize, points: &[Vec2]) -> DMatrix<f64> {
    let m = ScaledMonomials::for_cell(cell, l);
    let mut out = DMatrix::zeros(points.len(), m.dim());
    let mut row = vec![0.0; m.dim()];
    for (i, &p) in points.iter().enumerate() {
        m.eval_into(p, &mut row);
        for (j, v) in row.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    out
}

/// Derivatives D^alpha (|alpha| <= 2) of the scaled monomials at `points`.
pub fn eval_basis_derivatives(
    cell: &Polygon,
    l: usize,
    alpha: (usize, usize),
    points: &[Vec2],
) -> Result<DMatrix<f64>, BasisError> {
    let order = alpha.0 + alpha.1;
    if order > 2 {
        return Err(BasisError::UnsupportedDerivative { order });
    }
    let m = ScaledMonomials::for_cell(cell, l);
    let mut out = DMatrix::zeros(points.len(), m.dim());
    let mut row = vec![0.0; m.dim()];
    for (i, &p) in points.iter().enumerate() {
        m.derivative_into(alpha, p, &mut row);
        for (j, v) in row.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

/// Matrix mapping monomial coefficients of degree `l` (scale `h`) to the
/// monomial coefficients of D^alpha of the polynomial, degree `l - |alpha|`.
pub fn derivative_matrix(l: usize, h: f64, alpha: (usize, usize)) -> DMatrix<f64> {
    let order = alpha.0 + alpha.1;
    let rows = basis_dim(l as isize - order as isize);
    let idx = multi_indices(l);
    let mut d = DMatrix::zeros(rows, idx.len());
    let inv = h.powi(-(order as i32));
    for (j, &(a, b)) in idx.iter().enumerate() {
        if a >= alpha.0 && b >= alpha.1 {
            let i = multi_index_position(a - alpha.0, b - alpha.1);
            d[(i, j)] = falling(a, alpha.0) * falling(b, alpha.1) * inv;
        }
    }
    d
}

/// Mass (Gram) matrix of the scaled monomials of degree `l` on `cell`.
pub fn gram_matrix(cell: &Polygon, l: usize, quad: &QuadratureRule) -> DMatrix<f64> {
    let m = ScaledMonomials::for_cell(cell, l);
    let n = m.dim();
    let mut g = DMatrix::zeros(n, n);
    let mut v = vec![0.0; n];
    for (&p, &w) in quad.points.iter().zip(&quad.weights) {
        m.eval_into(p, &mut v);
        for j in 0..n {
            let wj = w * v[j];
            for i in 0..n {
                g[(i, j)] += wj * v[i];
            }
        }
    }
    g
}

/// Coefficients of the L2(P)-best approximation of `f` in the scaled
/// monomials of degree `l`.
pub fn l2_project(cell: &Polygon, l: usize, f: impl Fn(Vec2) -> f64) -> Result<DVector<f64>, BasisError> {
    let quad = polygon_quadrature(cell, 2 * l + 12)?;
    let m = ScaledMonomials::for_cell(cell, l);
    let g = gram_matrix(cell, l, &quad);
    let mut rhs = DVector::zeros(m.dim());
    let mut v = vec![0.0; m.dim()];
    for (&p, &w) in quad.points.iter().zip(&quad.weights) {
        m.eval_into(p, &mut v);
        let fw = w * f(p);
        for (r, vi) in rhs.iter_mut().zip(&v) {
            *r += fw * vi;
        }
    }
    let chol = g.cholesky().ok_or(BasisError::SingularGram { degree: l, diameter: cell.diameter() })?;
    Ok(chol.solve(&rhs))
}

/// Upper-triangular change of basis `T` such that the polynomials
/// `q_j = sum_i T_ij m_i` are L2(P)-orthonormal (`T^T G T = I`). Since `T` is
/// triangular in the graded ordering, the first `basis_dim(l')` members span
/// the polynomials of degree `l'`. Monomial coefficients are recovered from
/// orthonormal ones by `c_mono = T c_orth`.
pub fn orthogonalize_basis(cell: &Polygon, l: usize) -> Result<DMatrix<f64>, BasisError> {
    match orthonormalize_with(cell, l, 2 * l) {
        Some(t) => Ok(t),
        None => orthonormalize_with(cell, l, 2 * l + 4).ok_or(BasisError::SingularGram { degree: l, diameter: cell.diameter() }),
    }
}

fn orthonormalize_with(cell: &Polygon, l: usize, degree: usize) -> Option<DMatrix<f64>> {
    let quad = polygon_quadrature(cell, degree).ok()?;
    let m = ScaledMonomials::for_cell(cell, l);
    let n = m.dim();
    let mut vw = DMatrix::zeros(quad.len(), n);
    let mut v = vec![0.0; n];
    for (k, (&p, &w)) in quad.points.iter().zip(&quad.weights).enumerate() {
        m.eval_into(p, &mut v);
        let sw = w.sqrt();
        for j in 0..n {
            vw[(k, j)] = sw * v[j];
        }
    }
    // Householder QR of the weighted Vandermonde matrix: R^T R = G with the
    // conditioning of sqrt(G) rather than G.
    let mut r = vw.qr().r();
    let rmax = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..n {
        if !(r[(i, i)].abs() > 1e-13 * rmax) {
            return None;
        }
        if r[(i, i)] < 0.0 {
            for j in i..n {
                r[(i, j)] = -r[(i, j)];
            }
        }
    }
    let mut t = DMatrix::identity(n, n);
    r.solve_upper_triangular_mut(&mut t).then_some(t)
}

/// Polynomial basis used by the local spaces: scaled monomials, optionally
/// replaced by the hierarchical orthonormal basis rescaled so that
/// `|P|^-1 int q_i q_j = delta_ij` (keeps interior moments O(1)).
#[derive(Clone, Debug)]
pub struct CellBasis {
    mono: ScaledMonomials,
    transform: Option<DMatrix<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BasisKind {
    #[default]
    Monomial,
    Orthogonal,
}

impl CellBasis {
    pub fn new(cell: &Polygon, degree: usize, kind: BasisKind) -> Result<Self, BasisError> {
        let mono = ScaledMonomials::for_cell(cell, degree);
        let transform = match kind {
            BasisKind::Monomial => None,
            BasisKind::Orthogonal => Some(orthogonalize_basis(cell, degree)? * cell.area().sqrt()),
        };
        Ok(Self { mono, transform })
    }

    pub fn degree(&self) -> usize {
        self.mono.degree
    }

    pub fn dim(&self) -> usize {
        self.mono.dim()
    }

    pub fn monomials(&self) -> &ScaledMonomials {
        &self.mono
    }

    /// Monomial coefficients of each basis member (columns).
    pub fn to_monomial(&self) -> DMatrix<f64> {
        self.transform.clone().unwrap_or_else(|| DMatrix::identity(self.dim(), self.dim()))
    }

    fn apply(&self, raw: &[f64], out: &mut [f64]) {
        match &self.transform {
            None => out.copy_from_slice(raw),
            Some(t) => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = (0..=j).map(|i| t[(i, j)] * raw[i]).sum();
                }
            }
        }
    }

    pub fn eval_into(&self, p: Vec2, out: &mut [f64]) {
        let mut raw = vec![0.0; self.dim()];
        self.mono.eval_into(p, &mut raw);
        self.apply(&raw, out);
    }

    pub fn eval(&self, p: Vec2) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        self.eval_into(p, v.as_mut_slice());
        v
    }

    pub fn derivative_into(&self, alpha: (usize, usize), p: Vec2, out: &mut [f64]) {
        let mut raw = vec![0.0; self.dim()];
        self.mono.derivative_into(alpha, p, &mut raw);
        self.apply(&raw, out);
    }

    pub fn derivative(&self, alpha: (usize, usize), p: Vec2) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        self.derivative_into(alpha, p, v.as_mut_slice());
        v
    }

    /// Matrix expressing D^alpha of each member (columns) in the members of
    /// degree `degree - |alpha|` of this same basis.
    pub fn derivative_in_basis(&self, alpha: (usize, usize)) -> DMatrix<f64> {
        let order = alpha.0 + alpha.1;
        let d = derivative_matrix(self.degree(), self.mono.scale, alpha);
        match &self.transform {
            None => d,
            Some(t) => {
                let low = basis_dim(self.degree() as isize - order as isize);
                let t_low = t.view((0, 0), (low, low)).into_owned();
                let mut rhs = d * t;
                t_low.solve_upper_triangular_mut(&mut rhs);
                rhs
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polygon {
        Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)]).unwrap()
    }

    fn pentagon() -> Polygon {
        Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.2, 0.1),
            Vec2::new(1.4, 0.9),
            Vec2::new(0.6, 1.5),
            Vec2::new(-0.2, 0.8),
        ])
        .unwrap()
    }

    #[test]
    fn dimensions() {
        assert_eq!(basis_dim(-1), 0);
        assert_eq!(basis_dim(0), 1);
        assert_eq!(basis_dim(3), 10);
        let idx = multi_indices(2);
        assert_eq!(idx, vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        for (k, &(a, b)) in multi_indices(6).iter().enumerate() {
            assert_eq!(multi_index_position(a, b), k);
        }
    }

    #[test]
    fn scaled_monomial_values() {
        let sq = square();
        let h = 2f64.sqrt();
        let v = eval_basis(&sq, 3, &[Vec2::new(0.5, 0.5)]);
        assert_eq!(v[(0, 0)], 1.0);
        assert!((1..10).all(|j| v[(0, j)] == 0.0));
        let pts = [Vec2::new(0.1, 0.7), Vec2::new(0.9, 0.2)];
        let dx = eval_basis_derivatives(&sq, 2, (1, 0), &pts).unwrap();
        assert!((dx[(0, 1)] - 1.0 / h).abs() < 1e-15 && (dx[(1, 1)] - 1.0 / h).abs() < 1e-15);
        assert!(dx.column(0).iter().all(|&x| x == 0.0));
        let dxx = eval_basis_derivatives(&sq, 2, (2, 0), &pts).unwrap();
        assert!((dxx[(0, 3)] - 2.0 / (h * h)).abs() < 1e-14);
        assert!(matches!(eval_basis_derivatives(&sq, 3, (2, 1), &pts), Err(BasisError::UnsupportedDerivative { order: 3 })));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = pentagon();
        let m = ScaledMonomials::for_cell(&p, 4);
        let x = Vec2::new(0.4, 0.6);
        let step = 1e-6;
        let mut d = vec![0.0; m.dim()];
        for (alpha, e) in [((1, 0), Vec2::new(step, 0.0)), ((0, 1), Vec2::new(0.0, step))] {
            m.derivative_into(alpha, x, &mut d);
            let fd = (m.eval(x + e) - m.eval(x - e)) / (2.0 * step);
            for j in 0..m.dim() {
                assert!((fd[j] - d[j]).abs() <= 1e-6 * d[j].abs().max(1.0), "alpha {alpha:?} j {j}");
            }
        }
    }

    #[test]
    fn derivative_matrix_agrees_with_pointwise_derivatives() {
        let p = pentagon();
        let l = 4;
        let m = ScaledMonomials::for_cell(&p, l);
        let lower = ScaledMonomials::for_cell(&p, l - 2);
        let d = derivative_matrix(l, m.scale, (1, 1));
        let x = Vec2::new(0.3, 0.9);
        let mut direct = vec![0.0; m.dim()];
        m.derivative_into((1, 1), x, &mut direct);
        let via = d.transpose() * lower.eval(x);
        for j in 0..m.dim() {
            assert!((via[j] - direct[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_exactness_on_cell_types() {
        use crate::mesh::{generate_hexagonal_distorted, generate_nonconvex_octagons, generate_voronoi};
        let mut cells = vec![square(), pentagon()];
        cells.extend(generate_hexagonal_distorted(3).unwrap().polygons().iter().take(5).cloned());
        cells.extend(generate_nonconvex_octagons(1).unwrap().polygons().iter().take(5).cloned());
        cells.extend(generate_voronoi(10, 1, 0).unwrap().mesh.polygons().iter().take(5).cloned());
        for cell in &cells {
            for degree in [2, 4, 8, 12] {
                let q = polygon_quadrature(cell, degree).unwrap();
                // exact monomial integrals through the divergence theorem
                for (a, b) in multi_indices(degree) {
                    let exact = boundary_monomial_integral(cell, a, b);
                    let approx = q.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32));
                    assert!((approx - exact).abs() <= 1e-12 * exact.abs().max(cell.area()), "({a},{b}) deg {degree}");
                }
                let wsum: f64 = q.weights.iter().sum();
                assert!((wsum - cell.area()).abs() <= 1e-13 * cell.area());
            }
        }
    }

    /// int_P x^a y^b = int_{dP} x^{a+1} y^b / (a+1) n_x, by high-order Gauss on edges.
    fn boundary_monomial_integral(cell: &Polygon, a: usize, b: usize) -> f64 {
        (0..cell.n())
            .map(|i| {
                let (p, q) = cell.edge(i);
                let n = cell.normal(i);
                edge_quadrature(p, q, a + b + 2).integrate(|x| x.x.powi(a as i32 + 1) * x.y.powi(b as i32)) * n.x / (a + 1) as f64
            })
            .sum()
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let p = pentagon();
        let m = ScaledMonomials::for_cell(&p, 3);
        let coeffs = DVector::from_fn(m.dim(), |i, _| (i as f64 * 0.37).sin());
        let f = |x: Vec2| m.eval(x).dot(&coeffs);
        let c = l2_project(&p, 3, f).unwrap();
        assert!((c - &coeffs).amax() < 1e-12);
        // idempotence
        let again = l2_project(&p, 3, |x| m.eval(x).dot(&coeffs)).unwrap();
        assert!((again - coeffs).amax() < 1e-12);
    }

    #[test]
    fn projection_of_sine_onto_constants() {
        let c = l2_project(&square(), 0, |p| p.x.sin()).unwrap();
        assert!((c[0] - (1.0 - 1f64.cos())).abs() < 1e-13);
    }

    #[test]
    fn projection_matches_least_squares_oracle() {
        // dense least squares on a fine uniform sampling (10x the rule size)
        let sq = square();
        let c = l2_project(&sq, 2, |p| p.x.powi(3)).unwrap();
        let m = ScaledMonomials::for_cell(&sq, 2);
        let n = 60;
        let mut a = DMatrix::zeros(n * n, m.dim());
        let mut rhs = DVector::zeros(n * n);
        for i in 0..n {
            for j in 0..n {
                let p = Vec2::new((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                a.row_mut(i * n + j).copy_from(&m.eval(p).transpose());
                rhs[i * n + j] = p.x.powi(3);
            }
        }
        let oracle = a.svd(true, true).solve(&rhs, 1e-14).unwrap();
        // midpoint sampling carries an O(1/n^2) bias
        assert!((&c - &oracle).amax() < 5e-4, "{c} vs {oracle}");
        let resid =
            |c: &DVector<f64>| polygon_quadrature(&sq, 10).unwrap().integrate(|p| (p.x.powi(3) - m.eval(p).dot(c)).powi(2));
        assert!(resid(&c) <= resid(&oracle));
    }

    #[test]
    fn orthogonalization() {
        let p = pentagon();
        for l in 0..=6 {
            let t = orthogonalize_basis(&p, l).unwrap();
            let g = gram_matrix(&p, l, &polygon_quadrature(&p, 2 * l).unwrap());
            let gi = t.transpose() * &g * &t;
            assert!((gi - DMatrix::identity(t.nrows(), t.nrows())).amax() < 1e-10, "l={l}");
        }
        let t0 = orthogonalize_basis(&p, 0).unwrap();
        assert!((t0[(0, 0)] - 1.0 / p.area().sqrt()).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_gram_is_perfectly_conditioned() {
        let p = pentagon();
        let l = 6;
        let q = polygon_quadrature(&p, 2 * l).unwrap();
        let g = gram_matrix(&p, l, &q);
        let t = orthogonalize_basis(&p, l).unwrap();
        let cond = |m: &DMatrix<f64>| {
            let s = m.clone().symmetric_eigenvalues();
            s.max() / s.min()
        };
        assert!((cond(&(t.transpose() * &g * &t)) - 1.0).abs() < 1e-8);
        assert!(cond(&g) > 1e3);
    }

    #[test]
    fn cell_basis_derivatives_in_basis() {
        let p = pentagon();
        for kind in [BasisKind::Monomial, BasisKind::Orthogonal] {
            let b = CellBasis::new(&p, 4, kind).unwrap();
            let low = CellBasis::new(&p, 2, kind).unwrap();
            let lap = b.derivative_in_basis((2, 0)) + b.derivative_in_basis((0, 2));
            let x = Vec2::new(0.5, 0.4);
            let direct = b.derivative((2, 0), x) + b.derivative((0, 2), x);
            let via = lap.transpose() * low.eval(x);
            assert!((direct - via).amax() < 1e-10, "{kind:?}");
        }
        let o = CellBasis::new(&p, 3, BasisKind::Orthogonal).unwrap();
        assert!((o.eval(p.centroid())[0] - 1.0).abs() < 1e-13);
    }
}
