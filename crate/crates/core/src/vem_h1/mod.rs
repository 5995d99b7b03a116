//! Scalar conforming H¹ virtual elements of order k on a polygon.
//!
//! Local DOFs, in this order: the n vertex values, then for every local edge
//! the k-1 moments `int v L_j(2t) dt` over the canonical edge parameter
//! t in [-1/2, 1/2] (so neighbouring cells agree), then the interior moments
//! `|P|^-1 int v q` against the first dim(k-2) basis polynomials.

mod global;

use nalgebra::{DMatrix, DVector};

pub use global::{solve_poisson, H1Discretization, H1DofMap, PoissonSolution};

use crate::mesh::Polygon;
use crate::poly_basis::{
    basis_dim, edge_quadrature, legendre_values, polygon_quadrature, BasisKind, CellBasis, EdgeRule, EdgeTraceMap,
};
use crate::{Error, Result, Vec2};

/// Singular-value ratio below which a projector system is declared rank
/// deficient.
const RANK_TOL: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct H1LocalSpace {
    cell: Polygon,
    k: usize,
    basis: CellBasis,
    trace: EdgeTraceMap,
    n_interior: usize,
    /// int q_a q_b over the cell, degree k
    gram: DMatrix<f64>,
    /// int grad q_a . grad q_b
    grad_gram: DMatrix<f64>,
    /// a(q_a, v) as a row over DOFs, before kernel fixing
    elliptic_rhs: DMatrix<f64>,
    /// DOFs of the basis polynomials (columns)
    dof_matrix: DMatrix<f64>,
    pi_nabla: DMatrix<f64>,
    pi0: DMatrix<f64>,
    grad_proj: [DMatrix<f64>; 2],
}

impl H1LocalSpace {
    pub fn new(cell: &Polygon, k: usize, kind: BasisKind) -> Result<Self> {
        if k == 0 {
            return Err(Error::Unsupported("H1 virtual elements need order k >= 1".into()));
        }
        let basis = CellBasis::new(cell, k, kind)?;
        let n = cell.n();
        let nk = basis.dim();
        let n_interior = basis_dim(k as isize - 2);
        let ndof = n * k + n_interior;
        let area = cell.area();
        let trace = EdgeTraceMap::new(k, false, k - 1);
        let mut space = Self {
            cell: cell.clone(),
            k,
            basis,
            trace,
            n_interior,
            gram: DMatrix::zeros(nk, nk),
            grad_gram: DMatrix::zeros(nk, nk),
            elliptic_rhs: DMatrix::zeros(nk, ndof),
            dof_matrix: DMatrix::zeros(ndof, nk),
            pi_nabla: DMatrix::zeros(nk, ndof),
            pi0: DMatrix::zeros(nk, ndof),
            grad_proj: [DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)],
        };

        let quad = polygon_quadrature(cell, 2 * k)?;
        let (mut v, mut dx, mut dy) = (vec![0.0; nk], vec![0.0; nk], vec![0.0; nk]);
        for (&p, &w) in quad.points.iter().zip(&quad.weights) {
            space.basis.eval_into(p, &mut v);
            space.basis.derivative_into((1, 0), p, &mut dx);
            space.basis.derivative_into((0, 1), p, &mut dy);
            for a in 0..nk {
                for b in 0..nk {
                    space.gram[(a, b)] += w * v[a] * v[b];
                    space.grad_gram[(a, b)] += w * (dx[a] * dx[b] + dy[a] * dy[b]);
                }
            }
        }

        // DOFs of the basis polynomials
        for i in 0..n {
            let val = space.basis.eval(cell.vertex(i));
            space.dof_matrix.row_mut(i).copy_from(&val.transpose());
        }
        for i in 0..n {
            let rule = space.edge_rule(i);
            let len = cell.edge_length(i);
            for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let t = space.canonical_param(i, rule.params[q]);
                let leg = legendre_values(k, 2.0 * t);
                let val = space.basis.eval(p);
                for j in 0..k - 1 {
                    let mut row = space.dof_matrix.row_mut(n + i * (k - 1) + j);
                    row += (w / len * leg[j]) * val.transpose();
                }
            }
        }
        for b in 0..n_interior {
            let row = space.gram.row(b) / area;
            space.dof_matrix.row_mut(n * k + b).copy_from(&row);
        }

        // a(q_a, v) = -int v lap q_a + int_dP v d_n q_a
        if k >= 2 {
            let lap = space.basis.derivative_in_basis((2, 0)) + space.basis.derivative_in_basis((0, 2));
            for a in 0..nk {
                for b in 0..n_interior {
                    space.elliptic_rhs[(a, n * k + b)] -= area * lap[(b, a)];
                }
            }
        }
        for i in 0..n {
            let rule = space.edge_rule(i);
            let normal = cell.normal(i);
            for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let weights = space.trace_weights(i, rule.params[q]);
                let dn = space.basis.derivative((1, 0), p) * normal.x + space.basis.derivative((0, 1), p) * normal.y;
                for a in 0..nk {
                    for (&d, &wt) in weights.0.iter().zip(&weights.1) {
                        space.elliptic_rhs[(a, d)] += w * dn[a] * wt;
                    }
                }
            }
        }

        // kernel: vertex average (k = 1) or cell mean through the first interior moment
        let mut g_fixed = space.grad_gram.clone();
        let mut b_fixed = space.elliptic_rhs.clone();
        b_fixed.row_mut(0).fill(0.0);
        if k == 1 {
            let mean = space.dof_matrix.rows(0, n).row_sum() / n as f64;
            g_fixed.row_mut(0).copy_from(&mean);
            for i in 0..n {
                b_fixed[(0, i)] = 1.0 / n as f64;
            }
        } else {
            let row = space.dof_matrix.row(n * k).into_owned();
            g_fixed.row_mut(0).copy_from(&row);
            b_fixed[(0, n * k)] = 1.0;
        }
        space.pi_nabla = solve_checked(&g_fixed, &b_fixed, cell)?;

        // L2 projection: low moments from DOFs, degrees k-1 and k from the elliptic projection
        let h_pi = &space.gram * &space.pi_nabla;
        let mut c = h_pi;
        for b in 0..n_interior {
            c.row_mut(b).fill(0.0);
            c[(b, n * k + b)] = area;
        }
        space.pi0 = solve_spd(&space.gram, &c, cell)?;

        // gradient projections onto P_{k-1} by integration by parts
        let nl = basis_dim(k as isize - 1);
        let h_low = space.gram.view((0, 0), (nl, nl)).into_owned();
        let mut rhs = [DMatrix::zeros(nl, ndof), DMatrix::zeros(nl, ndof)];
        for (comp, alpha) in [(1, 0), (0, 1)].into_iter().enumerate() {
            if n_interior > 0 {
                let d = space.basis.derivative_in_basis(alpha);
                for b in 0..nl {
                    for g in 0..n_interior {
                        rhs[comp][(b, n * k + g)] -= area * d[(g, b)];
                    }
                }
            }
        }
        for i in 0..n {
            let rule = space.edge_rule(i);
            let normal = cell.normal(i);
            for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let weights = space.trace_weights(i, rule.params[q]);
                let val = space.basis.eval(p);
                for (comp, nc) in [normal.x, normal.y].into_iter().enumerate() {
                    for b in 0..nl {
                        for (&d, &wt) in weights.0.iter().zip(&weights.1) {
                            rhs[comp][(b, d)] += w * val[b] * nc * wt;
                        }
                    }
                }
            }
        }
        let [rx, ry] = rhs;
        space.grad_proj = [solve_spd(&h_low, &rx, cell)?, solve_spd(&h_low, &ry, cell)?];
        Ok(space)
    }

    pub fn cell(&self) -> &Polygon {
        &self.cell
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn ndof(&self) -> usize {
        self.cell.n() * self.k + self.n_interior
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn basis(&self) -> &CellBasis {
        &self.basis
    }

    /// Local index of moment `j` on local edge `i`.
    pub fn edge_dof(&self, i: usize, j: usize) -> usize {
        self.cell.n() + i * (self.k - 1) + j
    }

    pub fn interior_dof(&self, b: usize) -> usize {
        self.cell.n() * self.k + b
    }

    /// Mass matrix of the degree-k basis.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn grad_gram(&self) -> &DMatrix<f64> {
        &self.grad_gram
    }

    /// Row `a` holds `int grad q_a . grad v` as a functional of the DOFs.
    pub fn elliptic_rhs(&self) -> &DMatrix<f64> {
        &self.elliptic_rhs
    }

    /// Column `a` holds the DOFs of basis polynomial `q_a`.
    pub fn dof_matrix(&self) -> &DMatrix<f64> {
        &self.dof_matrix
    }

    /// DOFs -> coefficients of the elliptic projection.
    pub fn pi_nabla(&self) -> &DMatrix<f64> {
        &self.pi_nabla
    }

    /// DOFs -> coefficients of the L2 projection onto P_k.
    pub fn pi0(&self) -> &DMatrix<f64> {
        &self.pi0
    }

    /// DOFs -> P_{k-1} coefficients of the L2 projections of d/dx and d/dy.
    pub fn grad_projectors(&self) -> &[DMatrix<f64>; 2] {
        &self.grad_proj
    }

    /// DOF vector of a polynomial given by its basis coefficients.
    pub fn dofs_of(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.dof_matrix * coeffs
    }

    /// `(I - D Pi)` for a projector `Pi`.
    pub fn residual_operator(&self, pi: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.ndof(), self.ndof()) - &self.dof_matrix * pi
    }

    /// Stabilized stiffness of the Laplacian with unit stabilization
    /// multiplier on the elliptic-projection residual.
    pub fn stiffness_matrix(&self) -> DMatrix<f64> {
        let r = self.residual_operator(&self.pi_nabla);
        self.pi_nabla.transpose() * &self.grad_gram * &self.pi_nabla + r.transpose() * r
    }

    /// Stabilized mass matrix for density `rho`; the stabilization
    /// multiplier is `mean(rho) |P| / ndof`.
    pub fn mass_matrix(&self, rho: impl Fn(Vec2) -> f64) -> DMatrix<f64> {
        let nk = self.basis.dim();
        let quad = polygon_quadrature(&self.cell, 2 * self.k + 4).expect("cell quadrature");
        let mut h_rho = DMatrix::zeros(nk, nk);
        let mut v = vec![0.0; nk];
        let mut total = 0.0;
        for (&p, &w) in quad.points.iter().zip(&quad.weights) {
            let r = rho(p);
            total += w * r;
            self.basis.eval_into(p, &mut v);
            for a in 0..nk {
                for b in 0..nk {
                    h_rho[(a, b)] += w * r * v[a] * v[b];
                }
            }
        }
        let r = self.residual_operator(&self.pi0);
        let stab = total / self.ndof() as f64;
        self.pi0.transpose() * h_rho * &self.pi0 + stab * r.transpose() * r
    }

    /// `int f Pi0_k phi_i` for every local basis function.
    pub fn load_vector(&self, f: impl Fn(Vec2) -> f64, degree: usize) -> DVector<f64> {
        let moments = self.moments(f, degree);
        self.pi0.tr_mul(&moments)
    }

    /// `int f q_a` over the cell with a rule of the given degree.
    pub fn moments(&self, f: impl Fn(Vec2) -> f64, degree: usize) -> DVector<f64> {
        let quad = polygon_quadrature(&self.cell, degree).expect("cell quadrature");
        let mut out = DVector::zeros(self.basis.dim());
        for (&p, &w) in quad.points.iter().zip(&quad.weights) {
            out.axpy(w * f(p), &self.basis.eval(p), 1.0);
        }
        out
    }

    fn edge_rule(&self, i: usize) -> EdgeRule {
        let (a, b) = self.cell.edge(i);
        edge_quadrature(a, b, 2 * self.k)
    }

    fn canonical_param(&self, i: usize, tau: f64) -> f64 {
        if self.cell.edge_flipped(i) {
            -tau
        } else {
            tau
        }
    }

    /// Trace of a virtual function on local edge `i` at local parameter
    /// `tau`, as (local DOF indices, weights).
    pub fn trace_weights(&self, i: usize, tau: f64) -> (Vec<usize>, Vec<f64>) {
        let n = self.cell.n();
        let t = self.canonical_param(i, tau);
        let w = self.trace.value_weights(t);
        let (start, end) = if self.cell.edge_flipped(i) { ((i + 1) % n, i) } else { (i, (i + 1) % n) };
        let mut dofs = vec![start, end];
        dofs.extend((0..self.k - 1).map(|j| self.edge_dof(i, j)));
        (dofs, w.iter().copied().collect())
    }
}

pub(crate) fn solve_checked(a: &DMatrix<f64>, b: &DMatrix<f64>, cell: &Polygon) -> Result<DMatrix<f64>> {
    let sv = a.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if !(min > RANK_TOL * max) {
        return Err(Error::RankDeficient { cell: 0, diameter: cell.diameter() });
    }
    a.clone().lu().solve(b).ok_or(Error::RankDeficient { cell: 0, diameter: cell.diameter() })
}

pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>, cell: &Polygon) -> Result<DMatrix<f64>> {
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => Err(Error::RankDeficient { cell: 0, diameter: cell.diameter() }),
    }
}

/// Local stiffness of the classical linear element on a triangle.
#[cfg(test)]
pub(crate) fn p1_triangle_stiffness(p: [Vec2; 3]) -> DMatrix<f64> {
    let (e1, e2) = (p[1] - p[0], p[2] - p[0]);
    let area = 0.5 * (e1.x * e2.y - e1.y * e2.x);
    let grads: Vec<Vec2> = (0..3)
        .map(|i| {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            let e = b - a;
            Vec2::new(-e.y, e.x) / (2.0 * area)
        })
        .collect();
    DMatrix::from_fn(3, 3, |i, j| area * grads[i].dot(&grads[j]))
}
