//! Conforming virtual elements for the polyharmonic problem `(-lap)^p u = f`
//! with clamped boundary conditions, for p = 1, 2 and r in {2p-1, 2p}.
//!
//! Local DOF order: per vertex the scaled derivatives `h_V^|nu| D^nu v(V)`
//! (value, then x and y derivatives when p = 2); per edge the moments of
//! `v` against Legendre polynomials of the canonical edge parameter,
//! followed (p = 2) by `h_e int L_j d_n v dt` with the canonical normal;
//! finally the interior moments `h_P^-2 int q v`.
//!
//! For p = 2 the local form is `int D^2 u : D^2 v`, which agrees with
//! `int lap u lap v` on clamped functions and whose kernel on a cell is P_1.

mod global;

use nalgebra::{DMatrix, DVector};

pub use global::{convergence_study, solve_polyharmonic, PolyDiscretization, PolyDofMap, PolyErrors, PolySolution};

use crate::mesh::Polygon;
use crate::poly_basis::{basis_dim, edge_quadrature, legendre_values, polygon_quadrature, BasisKind, CellBasis, EdgeTraceMap};
use crate::vem_h1::{solve_checked, solve_spd};
use crate::{Error, Result, Vec2};

/// Operator order and polynomial degree of a polyharmonic space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolyOrder {
    pub p: usize,
    pub r: usize,
}

impl PolyOrder {
    pub fn new(p: usize, r: usize) -> Result<Self> {
        if !(p == 1 || p == 2) {
            return Err(Error::Unsupported(format!("polyharmonic order p = {p}; only p = 1, 2 are implemented")));
        }
        if r + 1 < 2 * p || r > 2 * p {
            return Err(Error::Unsupported(format!("degree r = {r} for p = {p}; expected r in {{{}, {}}}", 2 * p - 1, 2 * p)));
        }
        Ok(Self { p, r })
    }

    /// DOFs per vertex.
    pub fn vertex_dofs(&self) -> usize {
        self.p * (self.p + 1) / 2
    }

    /// Moments of the trace per edge.
    pub fn value_moments(&self) -> usize {
        (self.r + 1).saturating_sub(2 * self.p)
    }

    /// Moments of the normal derivative per edge (p = 2).
    pub fn normal_moments(&self) -> usize {
        if self.p == 2 {
            self.r + 2 - 2 * self.p
        } else {
            0
        }
    }

    pub fn edge_dofs(&self) -> usize {
        self.value_moments() + self.normal_moments()
    }

    pub fn interior_dofs(&self) -> usize {
        basis_dim(self.r as isize - 2 * self.p as isize)
    }
}

/// Dimension of the local space on a cell with `n` vertices, evaluated from
/// the closed-form count (negative summands clamped to zero).
pub fn dof_count(n: usize, p: usize, r: usize) -> Result<usize> {
    PolyOrder::new(p, r)?;
    let (p, r, n) = (p as isize, r as isize, n as isize);
    let edge: isize = (0..p).map(|j| (r - 2 * p + j + 1).max(0)).sum();
    let m = r - 2 * p;
    let interior = if m < 0 { 0 } else { (m + 1) * (m + 2) / 2 };
    Ok((p * (p + 1) / 2 * n + n * edge + interior) as usize)
}

/// Mean of the values at the vertices of a cell.
pub fn vertex_average(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear combination of local DOFs.
type DofWeights = Vec<(usize, f64)>;

#[derive(Clone, Debug)]
pub struct PolyharmonicLocalSpace {
    cell: Polygon,
    order: PolyOrder,
    basis: CellBasis,
    value_trace: EdgeTraceMap,
    normal_trace: Option<EdgeTraceMap>,
    /// per edge: data of the canonical value trace, as DOF combinations
    value_data: Vec<Vec<DofWeights>>,
    normal_data: Vec<Vec<DofWeights>>,
    gram: DMatrix<f64>,
    energy_gram: DMatrix<f64>,
    elliptic_rhs: DMatrix<f64>,
    dof_matrix: DMatrix<f64>,
    projector: DMatrix<f64>,
    load_projector: DMatrix<f64>,
}

impl PolyharmonicLocalSpace {
    pub fn new(cell: &Polygon, p: usize, r: usize) -> Result<Self> {
        let order = PolyOrder::new(p, r)?;
        let basis = CellBasis::new(cell, r, BasisKind::Monomial)?;
        let n = cell.n();
        let nk = basis.dim();
        let ndof = dof_count(n, p, r)?;
        let hp = cell.diameter();
        let value_trace = EdgeTraceMap::new(r, p == 2, order.value_moments());
        let normal_trace = (p == 2).then(|| EdgeTraceMap::new(r - 1, false, order.normal_moments()));
        let mut s = Self {
            cell: cell.clone(),
            order,
            basis,
            value_trace,
            normal_trace,
            value_data: Vec::new(),
            normal_data: Vec::new(),
            gram: DMatrix::zeros(nk, nk),
            energy_gram: DMatrix::zeros(nk, nk),
            elliptic_rhs: DMatrix::zeros(nk, ndof),
            dof_matrix: DMatrix::zeros(ndof, nk),
            projector: DMatrix::zeros(nk, ndof),
            load_projector: DMatrix::zeros(0, 0),
        };
        for i in 0..n {
            let (v, nd) = s.edge_data(i);
            s.value_data.push(v);
            s.normal_data.push(nd);
        }

        let quad = polygon_quadrature(cell, 2 * r)?;
        for (&pt, &w) in quad.points.iter().zip(&quad.weights) {
            let v = s.basis.eval(pt);
            s.gram += w * &v * v.transpose();
            if p == 1 {
                let dx = s.basis.derivative((1, 0), pt);
                let dy = s.basis.derivative((0, 1), pt);
                s.energy_gram += w * (&dx * dx.transpose() + &dy * dy.transpose());
            } else {
                let xx = s.basis.derivative((2, 0), pt);
                let xy = s.basis.derivative((1, 1), pt);
                let yy = s.basis.derivative((0, 2), pt);
                s.energy_gram += w * (&xx * xx.transpose() + 2.0 * &xy * xy.transpose() + &yy * yy.transpose());
            }
        }

        // DOFs of the basis polynomials
        let nvd = order.vertex_dofs();
        for i in 0..n {
            let x = cell.vertex(i);
            let hv = cell.vertex_h(i);
            s.dof_matrix.row_mut(i * nvd).copy_from(&s.basis.eval(x).transpose());
            if p == 2 {
                s.dof_matrix.row_mut(i * nvd + 1).copy_from(&(hv * s.basis.derivative((1, 0), x)).transpose());
                s.dof_matrix.row_mut(i * nvd + 2).copy_from(&(hv * s.basis.derivative((0, 1), x)).transpose());
            }
        }
        for i in 0..n {
            let (a, b) = s.canonical_edge(i);
            let len = (b - a).norm();
            let nc = canonical_normal(a, b);
            let rule = edge_quadrature(a, b, 2 * r);
            for (q, (&pt, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let leg = legendre_values(r, 2.0 * rule.params[q]);
                let val = s.basis.eval(pt);
                for j in 0..order.value_moments() {
                    let d = s.edge_dof(i, j);
                    let mut row = s.dof_matrix.row_mut(d);
                    row += (w / len * leg[j]) * val.transpose();
                }
                if p == 2 {
                    let dn = s.basis.derivative((1, 0), pt) * nc.x + s.basis.derivative((0, 1), pt) * nc.y;
                    for j in 0..order.normal_moments() {
                        let d = s.edge_dof(i, order.value_moments() + j);
                        let mut row = s.dof_matrix.row_mut(d);
                        row += (w * leg[j]) * dn.transpose();
                    }
                }
            }
        }
        for b in 0..order.interior_dofs() {
            let row = s.gram.row(b) / (hp * hp);
            let d = s.interior_dof(b);
            s.dof_matrix.row_mut(d).copy_from(&row);
        }

        s.build_elliptic_rhs()?;
        s.build_projectors()?;
        Ok(s)
    }

    fn build_elliptic_rhs(&mut self) -> Result<()> {
        let (p, r) = (self.order.p, self.order.r);
        let n = self.cell.n();
        let nk = self.basis.dim();
        let hp2 = self.cell.diameter().powi(2);
        // volume term: (-1)^p int (lap^p q) v through the interior moments
        if self.order.interior_dofs() > 0 {
            let op = if p == 1 {
                -(self.basis.derivative_in_basis((2, 0)) + self.basis.derivative_in_basis((0, 2)))
            } else {
                self.basis.derivative_in_basis((4, 0))
                    + 2.0 * self.basis.derivative_in_basis((2, 2))
                    + self.basis.derivative_in_basis((0, 4))
            };
            for a in 0..nk {
                for b in 0..self.order.interior_dofs() {
                    let d = self.interior_dof(b);
                    self.elliptic_rhs[(a, d)] += hp2 * op[(b, a)];
                }
            }
        }
        for i in 0..n {
            let (a, b) = self.cell.edge(i);
            let normal = self.cell.normal(i);
            let tangent = self.cell.tangent(i);
            let rule = edge_quadrature(a, b, 2 * r);
            for (q, (&pt, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let tau = rule.params[q];
                let val = self.value_weights(i, tau);
                let grad_n = self.basis.derivative((1, 0), pt) * normal.x + self.basis.derivative((0, 1), pt) * normal.y;
                if p == 1 {
                    for a in 0..nk {
                        for &(d, c) in &val {
                            self.elliptic_rhs[(a, d)] += w * grad_n[a] * c;
                        }
                    }
                    continue;
                }
                let xx = self.basis.derivative((2, 0), pt);
                let xy = self.basis.derivative((1, 1), pt);
                let yy = self.basis.derivative((0, 2), pt);
                let lap_dn = (self.basis.derivative((3, 0), pt) + self.basis.derivative((1, 2), pt)) * normal.x
                    + (self.basis.derivative((2, 1), pt) + self.basis.derivative((0, 3), pt)) * normal.y;
                let dn = self.normal_weights(i, tau);
                let dt = self.tangential_weights(i, tau);
                for a in 0..nk {
                    let hn = Vec2::new(xx[a] * normal.x + xy[a] * normal.y, xy[a] * normal.x + yy[a] * normal.y);
                    let (nhn, thn) = (normal.dot(&hn), tangent.dot(&hn));
                    for &(d, c) in &val {
                        self.elliptic_rhs[(a, d)] -= w * lap_dn[a] * c;
                    }
                    for &(d, c) in &dn {
                        self.elliptic_rhs[(a, d)] += w * nhn * c;
                    }
                    for &(d, c) in &dt {
                        self.elliptic_rhs[(a, d)] += w * thn * c;
                    }
                }
            }
        }
        Ok(())
    }

    fn build_projectors(&mut self) -> Result<()> {
        let (p, r) = (self.order.p, self.order.r);
        let n = self.cell.n();
        let nvd = self.order.vertex_dofs();
        let n_kernel = basis_dim(p as isize - 1);
        let mut g = self.energy_gram.clone();
        let mut b = self.elliptic_rhs.clone();
        // vertex averages of D^nu, |nu| <= p - 1
        let alphas = [(0, 0), (1, 0), (0, 1)];
        for (row, &alpha) in alphas.iter().take(n_kernel).enumerate() {
            let mut grow = DVector::zeros(self.basis.dim());
            b.row_mut(row).fill(0.0);
            for i in 0..n {
                grow += self.basis.derivative(alpha, self.cell.vertex(i)) / n as f64;
                let scale = if row == 0 { 1.0 } else { 1.0 / self.cell.vertex_h(i) };
                b[(row, i * nvd + row)] = scale / n as f64;
            }
            g.row_mut(row).copy_from(&grow.transpose());
        }
        self.projector = solve_checked(&g, &b, &self.cell)?;

        // L2 projection onto P_{r-p} for the load: low moments from the
        // interior DOFs, the rest from the elliptic projection
        let nl = basis_dim(r as isize - p as isize);
        let h_lo = self.gram.view((0, 0), (nl, nl)).into_owned();
        let mut c = (&self.gram * &self.projector).rows(0, nl).into_owned();
        let hp2 = self.cell.diameter().powi(2);
        for beta in 0..self.order.interior_dofs() {
            c.row_mut(beta).fill(0.0);
            c[(beta, self.interior_dof(beta))] = hp2;
        }
        self.load_projector = solve_spd(&h_lo, &c, &self.cell)?;
        Ok(())
    }

    pub fn cell(&self) -> &Polygon {
        &self.cell
    }

    pub fn order(&self) -> PolyOrder {
        self.order
    }

    pub fn ndof(&self) -> usize {
        self.dof_matrix.nrows()
    }

    pub fn basis(&self) -> &CellBasis {
        &self.basis
    }

    pub fn vertex_dof(&self, i: usize, m: usize) -> usize {
        i * self.order.vertex_dofs() + m
    }

    /// Local index of edge moment `j` of local edge `i` (value moments
    /// first, then normal-derivative moments).
    pub fn edge_dof(&self, i: usize, j: usize) -> usize {
        self.cell.n() * self.order.vertex_dofs() + i * self.order.edge_dofs() + j
    }

    pub fn interior_dof(&self, b: usize) -> usize {
        self.cell.n() * (self.order.vertex_dofs() + self.order.edge_dofs()) + b
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `a_P(q_a, q_b)`.
    pub fn energy_gram(&self) -> &DMatrix<f64> {
        &self.energy_gram
    }

    /// Row `a`: `a_P(q_a, v)` as a functional of the DOFs of `v`.
    pub fn elliptic_rhs(&self) -> &DMatrix<f64> {
        &self.elliptic_rhs
    }

    pub fn dof_matrix(&self) -> &DMatrix<f64> {
        &self.dof_matrix
    }

    /// DOFs -> coefficients of the elliptic projection.
    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    /// DOFs -> coefficients (degree r - p) of the L2 projection used by the load.
    pub fn load_projector(&self) -> &DMatrix<f64> {
        &self.load_projector
    }

    /// Consistency part plus `h_P^(2-2p)` times the identity on `(I - D Pi)`.
    pub fn local_matrix(&self) -> DMatrix<f64> {
        let res = DMatrix::identity(self.ndof(), self.ndof()) - &self.dof_matrix * &self.projector;
        let scale = self.cell.diameter().powi(2 - 2 * self.order.p as i32);
        self.projector.transpose() * &self.energy_gram * &self.projector + scale * res.transpose() * res
    }

    pub fn load_vector(&self, f: impl Fn(Vec2) -> f64, degree: usize) -> DVector<f64> {
        let nl = self.load_projector.nrows();
        let quad = polygon_quadrature(&self.cell, degree).expect("cell quadrature");
        let mut m = DVector::zeros(nl);
        for (&pt, &w) in quad.points.iter().zip(&quad.weights) {
            m += w * f(pt) * self.basis.eval(pt).rows(0, nl);
        }
        self.load_projector.tr_mul(&m)
    }

    /// Endpoints of local edge `i` in canonical orientation.
    fn canonical_edge(&self, i: usize) -> (Vec2, Vec2) {
        let (a, b) = self.cell.edge(i);
        if self.cell.edge_flipped(i) {
            (b, a)
        } else {
            (a, b)
        }
    }

    fn canonical_ends(&self, i: usize) -> (usize, usize) {
        let j = (i + 1) % self.cell.n();
        if self.cell.edge_flipped(i) {
            (j, i)
        } else {
            (i, j)
        }
    }

    fn edge_data(&self, i: usize) -> (Vec<DofWeights>, Vec<DofWeights>) {
        let (s, e) = self.canonical_ends(i);
        let (a, b) = self.canonical_edge(i);
        let len = (b - a).norm();
        let tc = (b - a) / len;
        let nc = canonical_normal(a, b);
        let nvd = self.order.vertex_dofs();
        let grad = |v: usize, dir: Vec2, f: f64| -> DofWeights {
            let hv = self.cell.vertex_h(v);
            vec![(v * nvd + 1, f * dir.x / hv), (v * nvd + 2, f * dir.y / hv)]
        };
        let mut value = vec![vec![(s * nvd, 1.0)], vec![(e * nvd, 1.0)]];
        let mut normal = Vec::new();
        if self.order.p == 2 {
            value.push(grad(s, tc, len));
            value.push(grad(e, tc, len));
            normal.push(grad(s, nc, 1.0));
            normal.push(grad(e, nc, 1.0));
            for j in 0..self.order.normal_moments() {
                normal.push(vec![(self.edge_dof(i, self.order.value_moments() + j), 1.0 / len)]);
            }
        }
        for j in 0..self.order.value_moments() {
            value.push(vec![(self.edge_dof(i, j), 1.0)]);
        }
        (value, normal)
    }

    fn combine(data: &[DofWeights], w: &DVector<f64>, scale: f64) -> DofWeights {
        let mut out = Vec::new();
        for (entries, &wd) in data.iter().zip(w.iter()) {
            for &(d, c) in entries {
                out.push((d, scale * wd * c));
            }
        }
        out
    }

    fn canonical_param(&self, i: usize, tau: f64) -> f64 {
        if self.cell.edge_flipped(i) {
            -tau
        } else {
            tau
        }
    }

    /// Trace `v` on local edge `i` at local parameter `tau` in [-1/2, 1/2].
    pub fn value_weights(&self, i: usize, tau: f64) -> Vec<(usize, f64)> {
        let w = self.value_trace.value_weights(self.canonical_param(i, tau));
        Self::combine(&self.value_data[i], &w, 1.0)
    }

    /// Derivative of the trace along the counterclockwise tangent.
    pub fn tangential_weights(&self, i: usize, tau: f64) -> Vec<(usize, f64)> {
        let w = self.value_trace.derivative_weights(self.canonical_param(i, tau));
        Self::combine(&self.value_data[i], &w, self.cell.edge_sign(i) / self.cell.edge_length(i))
    }

    /// Outward normal derivative on local edge `i` (p = 2 only).
    pub fn normal_weights(&self, i: usize, tau: f64) -> Vec<(usize, f64)> {
        let map = self.normal_trace.as_ref().expect("normal traces exist for p = 2");
        let w = map.value_weights(self.canonical_param(i, tau));
        Self::combine(&self.normal_data[i], &w, self.cell.edge_sign(i))
    }
}

/// Canonical edge normal: the canonical tangent rotated clockwise.
fn canonical_normal(a: Vec2, b: Vec2) -> Vec2 {
    let t = (b - a).normalize();
    Vec2::new(t.y, -t.x)
}
