//! Linear elastodynamics `rho u_tt - div sigma(u) = f` with vector H1
//! virtual elements and leap-frog time stepping.
//!
//! Vector DOFs are numbered component-major: all x components, then all y
//! components of the scalar numbering.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;

use crate::convergence::ConvergenceTable;
use crate::field::{FnField, ScalarField};
use crate::la_core::{Assembler, DofPartition, SparseCholesky, SparseMatrix};
use crate::mesh::{BoundaryMarker, PolygonalMesh};
use crate::poly_basis::{basis_dim, edge_quadrature, polygon_quadrature, BasisKind};
use crate::vem_h1::{H1Discretization, H1LocalSpace};
use crate::{Error, Result, Vec2};

const DATA_QUAD_EXTRA: usize = 10;

/// Growth factor over the initial size that counts as a blow-up.
pub const BLOW_UP_FACTOR: f64 = 1e6;

/// Default Courant number of [`cfl_time_step`].
pub const DEFAULT_CFL: f64 = 0.1;
/// Desk-scale benchmark schedule. Half a period ends on a displacement
/// extremum, so the final-time errors include the interpolation part.
pub const BENCHMARK_T_END: f64 = 0.5;
pub const BENCHMARK_DT_MAX: f64 = 5e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub rho: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl Material {
    pub fn new(rho: f64, lambda: f64, mu: f64) -> Result<Self> {
        if !(rho > 0.0) || !(lambda >= 0.0) || !(mu >= 0.0) || !(rho.is_finite() && lambda.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "material needs rho > 0 and lambda, mu >= 0 (got rho = {rho}, lambda = {lambda}, mu = {mu})"
            )));
        }
        Ok(Self { rho, lambda, mu })
    }

    /// rho = lambda = mu = 1.
    pub fn unit() -> Self {
        Self { rho: 1.0, lambda: 1.0, mu: 1.0 }
    }

    /// Compressional and shear wave speeds.
    pub fn wave_speeds(&self) -> (f64, f64) {
        (((self.lambda + 2.0 * self.mu) / self.rho).sqrt(), (self.mu / self.rho).sqrt())
    }

    /// Hooke's law applied to a symmetric tensor.
    pub fn stress(&self, strain: &Matrix2<f64>) -> Matrix2<f64> {
        2.0 * self.mu * strain + self.lambda * strain.trace() * Matrix2::identity()
    }
}

/// Vector discretization: two copies of the scalar H1 space coupled by
/// the stiffness tensor.
#[derive(Clone, Debug)]
pub struct ElasticDiscretization {
    scalar: H1Discretization,
    materials: Vec<Material>,
    assembler: Assembler,
    neumann: Vec<(usize, usize)>,
}

impl ElasticDiscretization {
    /// Uniform material.
    pub fn new(mesh: &PolygonalMesh, k: usize, kind: BasisKind, material: Material) -> Result<Self> {
        Self::with_materials(mesh, k, kind, vec![material; mesh.num_cells()])
    }

    /// One material per cell.
    pub fn with_materials(mesh: &PolygonalMesh, k: usize, kind: BasisKind, materials: Vec<Material>) -> Result<Self> {
        if materials.len() != mesh.num_cells() {
            return Err(Error::InvalidInput(format!("{} materials for {} cells", materials.len(), mesh.num_cells())));
        }
        for m in &materials {
            Material::new(m.rho, m.lambda, m.mu)?;
        }
        let scalar = H1Discretization::new(mesh, k, kind)?;
        let n = scalar.n_dofs();
        let cell_dofs = (0..mesh.num_cells())
            .map(|c| {
                let d = scalar.dofs().cell_dofs(c);
                d.iter().map(|&i| Some(i)).chain(d.iter().map(|&i| Some(n + i))).collect()
            })
            .collect();
        let assembler = Assembler::new(2 * n, cell_dofs);
        // (cell, local edge) of every Neumann edge
        let mut neumann = Vec::new();
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.boundary == Some(BoundaryMarker::Neumann) {
                let c = edge.cells[0].or(edge.cells[1]).expect("boundary edge has a cell");
                let i = mesh.cell_edges(c).iter().position(|&x| x == e).expect("edge belongs to its cell");
                neumann.push((c, i));
            }
        }
        Ok(Self { scalar, materials, assembler, neumann })
    }

    pub fn scalar(&self) -> &H1Discretization {
        &self.scalar
    }

    pub fn order(&self) -> usize {
        self.scalar.order()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.scalar.n_dofs()
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    /// DOFs on Dirichlet edges, both components.
    pub fn dirichlet_mask(&self, mesh: &PolygonalMesh) -> Vec<bool> {
        let m = self.scalar.dofs().dirichlet_mask(mesh);
        m.iter().chain(m.iter()).copied().collect()
    }

    pub fn local_values(&self, c: usize, u: &DVector<f64>) -> DVector<f64> {
        let d = self.assembler.cell_dofs(c);
        DVector::from_iterator(d.len(), d.iter().map(|i| u[i.expect("vector DOFs are global")]))
    }

    /// `rho Pi0_k` consistency plus the scalar mass stabilization, per component.
    pub fn local_mass(&self, c: usize) -> DMatrix<f64> {
        let s = self.scalar.space(c);
        let rho = self.materials[c].rho;
        let block = s.mass_matrix(|_| rho);
        let n = s.ndof();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&block);
        m.view_mut((n, n), (n, n)).copy_from(&block);
        m
    }

    /// `int D Pi0_{k-1} eps(v) : Pi0_{k-1} eps(w)` plus `(lambda + 2 mu)` times
    /// the DOF-residual stabilization of the elliptic projection.
    pub fn local_stiffness(&self, c: usize) -> DMatrix<f64> {
        let s = self.scalar.space(c);
        let mat = self.materials[c];
        let (e11, e22, e12) = strain_operators(s);
        let h = low_gram(s);
        let div = &e11 + &e22;
        let form = |a: &DMatrix<f64>, b: &DMatrix<f64>| a.transpose() * &h * b;
        let mut k = 2.0 * mat.mu * (form(&e11, &e11) + form(&e22, &e22) + 2.0 * form(&e12, &e12)) + mat.lambda * form(&div, &div);
        let r = s.residual_operator(s.pi_nabla());
        let stab = (mat.lambda + 2.0 * mat.mu) * r.transpose() * r;
        let n = s.ndof();
        let mut top = k.view_mut((0, 0), (n, n));
        top += &stab;
        let mut bottom = k.view_mut((n, n), (n, n));
        bottom += &stab;
        k
    }

    pub fn mass(&self) -> SparseMatrix {
        let locals: Vec<_> = (0..self.materials.len()).into_par_iter().map(|c| self.local_mass(c)).collect();
        self.assembler.assemble(&locals)
    }

    pub fn stiffness(&self) -> SparseMatrix {
        let locals: Vec<_> = (0..self.materials.len()).into_par_iter().map(|c| self.local_stiffness(c)).collect();
        self.assembler.assemble(&locals)
    }

    /// `int f . Pi0_k v + sum_{Neumann e} int_e g . v`.
    pub fn load(&self, f: &(dyn Fn(Vec2) -> Vec2 + Sync), traction: Option<&(dyn Fn(Vec2) -> Vec2 + Sync)>) -> DVector<f64> {
        let k = self.order();
        let locals: Vec<DVector<f64>> = self
            .scalar
            .spaces()
            .par_iter()
            .map(|s| {
                let n = s.ndof();
                let mut out = DVector::zeros(2 * n);
                let quad = polygon_quadrature(s.cell(), 2 * k + DATA_QUAD_EXTRA).expect("cell quadrature");
                let nk = s.basis().dim();
                let mut moments = DMatrix::zeros(nk, 2);
                for (&p, &w) in quad.points.iter().zip(&quad.weights) {
                    let q = s.basis().eval(p);
                    let fp = f(p);
                    for b in 0..nk {
                        moments[(b, 0)] += w * fp.x * q[b];
                        moments[(b, 1)] += w * fp.y * q[b];
                    }
                }
                let local = s.pi0().tr_mul(&moments);
                out.rows_mut(0, n).copy_from(&local.column(0));
                out.rows_mut(n, n).copy_from(&local.column(1));
                out
            })
            .collect();
        let mut rhs = self.assembler.assemble_vector(&locals);
        if let Some(g) = traction {
            let nd = self.scalar.n_dofs();
            for &(c, i) in &self.neumann {
                let s = self.scalar.space(c);
                let (a, b) = s.cell().edge(i);
                let rule = edge_quadrature(a, b, 2 * k + DATA_QUAD_EXTRA);
                let dofs = self.scalar.dofs().cell_dofs(c);
                for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    let gp = g(p);
                    let (local, weights) = s.trace_weights(i, rule.params[q]);
                    for (&l, &wt) in local.iter().zip(&weights) {
                        rhs[dofs[l]] += w * gp.x * wt;
                        rhs[nd + dofs[l]] += w * gp.y * wt;
                    }
                }
            }
        }
        rhs
    }

    pub fn interpolate(&self, mesh: &PolygonalMesh, field: [&dyn ScalarField; 2]) -> DVector<f64> {
        let ux = self.scalar.interpolate(mesh, field[0]);
        let uy = self.scalar.interpolate(mesh, field[1]);
        DVector::from_iterator(self.n_dofs(), ux.iter().chain(uy.iter()).copied())
    }

    fn component(&self, u: &DVector<f64>, comp: usize) -> DVector<f64> {
        let n = self.scalar.n_dofs();
        u.rows(comp * n, n).into_owned()
    }

    /// `(||u - Pi0_k u_h||_0, |u - grad Pi_nabla u_h|_1)` summed over components.
    pub fn errors(&self, u: &DVector<f64>, exact: [&dyn ScalarField; 2]) -> (f64, f64) {
        let (lx, hx) = self.scalar.errors(&self.component(u, 0), exact[0]);
        let (ly, hy) = self.scalar.errors(&self.component(u, 1), exact[1]);
        ((lx * lx + ly * ly).sqrt(), (hx * hx + hy * hy).sqrt())
    }

    /// Squared energy norm `||rho^1/2 v||_0^2 + |u|_1^2` through the
    /// projections `Pi0_k v` and `Pi0_{k-1} grad u`.
    pub fn energy_norm(&self, u: &DVector<f64>, velocity: &DVector<f64>) -> f64 {
        (0..self.materials.len())
            .into_par_iter()
            .map(|c| {
                let s = self.scalar.space(c);
                let n = s.ndof();
                let (lu, lv) = (self.local_values(c, u), self.local_values(c, velocity));
                let h = low_gram(s);
                let mut e = 0.0;
                for comp in 0..2 {
                    let v = s.pi0() * lv.rows(comp * n, n);
                    e += self.materials[c].rho * v.dot(&(s.gram() * &v));
                    for g in s.grad_projectors() {
                        let d = g * lu.rows(comp * n, n);
                        e += d.dot(&(&h * &d));
                    }
                }
                e
            })
            .sum()
    }

    /// Spectral condition number of the stiffness on the Dirichlet-free
    /// DOFs. Dense eigenvalues, so meant for small meshes.
    pub fn stiffness_condition(&self, mesh: &PolygonalMesh) -> f64 {
        let part = DofPartition::new(&self.dirichlet_mask(mesh));
        let k = self.stiffness().restrict(part.reduced_map(), part.n_free(), part.reduced_map(), part.n_free());
        let eig = k.to_dense().symmetric_eigenvalues();
        eig.max() / eig.min()
    }
}

/// Gram matrix of the degree k-1 basis members.
fn low_gram(s: &H1LocalSpace) -> DMatrix<f64> {
    let nl = basis_dim(s.order() as isize - 1);
    s.gram().view((0, 0), (nl, nl)).into_owned()
}

/// Rows: P_{k-1} coefficients of the projected strain components
/// (eps_11, eps_22, eps_12) over the local vector DOFs.
fn strain_operators(s: &H1LocalSpace) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let [gx, gy] = s.grad_projectors();
    let (nl, n) = (gx.nrows(), s.ndof());
    let mut e11 = DMatrix::zeros(nl, 2 * n);
    let mut e22 = DMatrix::zeros(nl, 2 * n);
    let mut e12 = DMatrix::zeros(nl, 2 * n);
    e11.view_mut((0, 0), (nl, n)).copy_from(gx);
    e22.view_mut((0, n), (nl, n)).copy_from(gy);
    e12.view_mut((0, 0), (nl, n)).copy_from(&(0.5 * gy));
    e12.view_mut((0, n), (nl, n)).copy_from(&(0.5 * gx));
    (e11, e22, e12)
}

pub fn wave_speeds(material: &Material) -> (f64, f64) {
    material.wave_speeds()
}

/// `C h_min / (k^2 c_P)` with h_min the smallest cell diameter.
pub fn cfl_time_step(mesh: &PolygonalMesh, k: usize, material: &Material, courant: f64) -> f64 {
    let h_min = mesh.polygons().iter().map(|p| p.diameter()).fold(f64::INFINITY, f64::min);
    courant * h_min / ((k * k) as f64 * material.wave_speeds().0)
}

/// Leap-frog integrator on the free DOFs; the mass matrix is factorized once.
pub struct Leapfrog {
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    solver: SparseCholesky,
    dt: f64,
}

impl Leapfrog {
    pub fn new(mass: SparseMatrix, stiffness: SparseMatrix, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let solver = SparseCholesky::factorize(&mass)?;
        Ok(Self { mass, stiffness, solver, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    /// `u1 = u0 + dt v0 + dt^2/2 M^-1 (F0 - K u0)`
    pub fn first_step(&self, u0: &DVector<f64>, v0: &DVector<f64>, f0: &DVector<f64>) -> Result<DVector<f64>> {
        let acc = self.solver.solve(&(f0 - self.stiffness.mul_vec(u0)))?;
        Ok(u0 + self.dt * v0 + 0.5 * self.dt * self.dt * acc)
    }

    /// `u_{n+1} = 2 u_n - u_{n-1} + dt^2 M^-1 (F_n - K u_n)`; symmetric in
    /// `prev` and the result, so swapping them steps backwards.
    pub fn step(&self, prev: &DVector<f64>, cur: &DVector<f64>, f: &DVector<f64>) -> Result<DVector<f64>> {
        let acc = self.solver.solve(&(f - self.stiffness.mul_vec(cur)))?;
        Ok(2.0 * cur - prev + self.dt * self.dt * acc)
    }

    /// Energy conserved exactly by the scheme when f = 0:
    /// `1/2 |(u_{n+1} - u_n)/dt|_M^2 + 1/2 u_n^T K u_{n+1}`.
    pub fn midpoint_energy(&self, cur: &DVector<f64>, next: &DVector<f64>) -> f64 {
        let du = (next - cur) / self.dt;
        0.5 * self.mass.bilinear(&du, &du) + 0.5 * self.stiffness.bilinear(cur, next)
    }

    /// Runs `n_steps` steps from `u0`, `v0`. `load(n)` is the load at time
    /// level n; `observe(n, u_{n-1}, u_n)` is called for n = 1..=n_steps.
    /// Returns `(u_{N-1}, u_N)`.
    pub fn run(
        &self,
        u0: &DVector<f64>,
        v0: &DVector<f64>,
        load: &dyn Fn(usize) -> DVector<f64>,
        n_steps: usize,
        mut observe: impl FnMut(usize, &DVector<f64>, &DVector<f64>),
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        if n_steps == 0 {
            return Ok((u0.clone(), u0.clone()));
        }
        let mut prev = u0.clone();
        let mut cur = self.first_step(u0, v0, &load(0))?;
        let scale = {
            let s = u0.norm().max(cur.norm());
            if s > 0.0 {
                s
            } else {
                1.0
            }
        };
        observe(1, &prev, &cur);
        for n in 1..n_steps {
            let next = self.step(&prev, &cur, &load(n))?;
            let norm = next.norm();
            if !(norm <= BLOW_UP_FACTOR * scale) {
                return Err(Error::BlowUp { step: n + 1, norm });
            }
            prev = cur;
            cur = next;
            observe(n + 1, &prev, &cur);
        }
        Ok((prev, cur))
    }
}

/// `sin^2(pi x) sin(2 pi y)` and its derivatives.
fn bump(p: Vec2) -> (f64, Vec2, Matrix2<f64>) {
    let sx = (PI * p.x).sin();
    let (s2y, c2y) = ((2.0 * PI * p.y).sin(), (2.0 * PI * p.y).cos());
    let (s2x, c2x) = ((2.0 * PI * p.x).sin(), (2.0 * PI * p.x).cos());
    let v = sx * sx * s2y;
    let g = Vec2::new(PI * s2x * s2y, 2.0 * PI * sx * sx * c2y);
    let xy = 2.0 * PI * PI * s2x * c2y;
    let h = Matrix2::new(2.0 * PI * PI * c2x * s2y, xy, xy, -4.0 * PI * PI * sx * sx * s2y);
    (v, g, h)
}

fn swap(p: Vec2) -> Vec2 {
    Vec2::new(p.y, p.x)
}

/// Spatial profile `U = (sin^2(pi x) sin(2 pi y), sin(2 pi x) sin^2(pi y))`.
pub fn benchmark_profile(p: Vec2) -> [(f64, Vec2, Matrix2<f64>); 2] {
    let first = bump(p);
    // the second component is the first with x and y exchanged
    let (v, g, h) = bump(swap(p));
    [first, (v, swap(g), Matrix2::new(h[(1, 1)], h[(0, 1)], h[(1, 0)], h[(0, 0)]))]
}

/// Exact benchmark solution `cos(2 pi t) U(x)` (period 1).
#[derive(Clone, Copy, Debug)]
pub struct Benchmark {
    pub material: Material,
}

impl Benchmark {
    pub fn temporal(t: f64) -> f64 {
        (2.0 * PI * t).cos()
    }

    /// Component `comp` of the displacement at time t.
    pub fn displacement(t: f64, comp: usize) -> impl ScalarField {
        let c = Self::temporal(t);
        FnField::new(
            move |p| c * benchmark_profile(p)[comp].0,
            move |p| c * benchmark_profile(p)[comp].1,
            move |p| c * benchmark_profile(p)[comp].2,
        )
    }

    /// Spatial part of the body force: `f(x, t) = cos(2 pi t) F(x)` with
    /// `F = -4 pi^2 rho U - mu lap U - (lambda + mu) grad div U`.
    pub fn force_profile(&self, p: Vec2) -> Vec2 {
        let [(u1, _, h1), (u2, _, h2)] = benchmark_profile(p);
        let m = self.material;
        let lap = Vec2::new(h1.trace(), h2.trace());
        let grad_div = Vec2::new(h1[(0, 0)] + h2[(0, 1)], h1[(0, 1)] + h2[(1, 1)]);
        -4.0 * PI * PI * m.rho * Vec2::new(u1, u2) - m.mu * lap - (m.lambda + m.mu) * grad_div
    }
}

/// Discrete initial displacement of the benchmark.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialData {
    /// DOF interpolant of the exact field.
    Interpolant,
    /// Solution of the discrete static problem with the exact field's
    /// elastic load. Starts the run on the discrete solution manifold and
    /// avoids exciting spurious mesh modes.
    #[default]
    ElasticProjection,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchmarkRun {
    pub h: f64,
    pub dofs: usize,
    pub l2: f64,
    pub h1: f64,
    pub dt: f64,
    pub steps: usize,
}

/// Benchmark on a mesh with homogeneous Dirichlet conditions on the whole
/// boundary, from `u_t(0) = 0` and `u(0)` per `init`, up to `t_end` in `steps` steps.
pub fn run_benchmark(
    mesh: &PolygonalMesh,
    k: usize,
    kind: BasisKind,
    material: Material,
    init: InitialData,
    t_end: f64,
    steps: usize,
) -> Result<BenchmarkRun> {
    if !(t_end > 0.0) || steps == 0 {
        return Err(Error::InvalidInput(format!("need t_end > 0 and at least one step (t_end = {t_end}, steps = {steps})")));
    }
    let (disc, state) = solve_benchmark(mesh, k, kind, material, init, t_end, steps)?;
    let (l2, h1) = disc.errors(&state, [&Benchmark::displacement(t_end, 0), &Benchmark::displacement(t_end, 1)]);
    let dofs = disc.dirichlet_mask(mesh).iter().filter(|&&c| !c).count();
    Ok(BenchmarkRun { h: mesh.max_diameter(), dofs, l2, h1, dt: t_end / steps as f64, steps })
}

/// Final full DOF vector of the benchmark run.
pub fn solve_benchmark(
    mesh: &PolygonalMesh,
    k: usize,
    kind: BasisKind,
    material: Material,
    init: InitialData,
    t_end: f64,
    steps: usize,
) -> Result<(ElasticDiscretization, DVector<f64>)> {
    let disc = ElasticDiscretization::new(mesh, k, kind, material)?;
    let part = DofPartition::new(&disc.dirichlet_mask(mesh));
    let restrict = |a: &SparseMatrix| a.restrict(part.reduced_map(), part.n_free(), part.reduced_map(), part.n_free());
    let dt = t_end / steps as f64;
    let lf = Leapfrog::new(restrict(&disc.mass()), restrict(&disc.stiffness()), dt)?;
    let bench = Benchmark { material };
    let force = part.restrict(&disc.load(&|p| bench.force_profile(p), None));
    let u0 = match init {
        InitialData::Interpolant => {
            part.restrict(&disc.interpolate(mesh, [&Benchmark::displacement(0.0, 0), &Benchmark::displacement(0.0, 1)]))
        }
        InitialData::ElasticProjection => {
            // -div sigma(U) = F + 4 pi^2 rho U
            let static_force = |p: Vec2| {
                let [(u1, _, _), (u2, _, _)] = benchmark_profile(p);
                bench.force_profile(p) + 4.0 * PI * PI * material.rho * Vec2::new(u1, u2)
            };
            let rhs = part.restrict(&disc.load(&static_force, None));
            SparseCholesky::factorize(lf.stiffness())?.solve(&rhs)?
        }
    };
    let v0 = DVector::zeros(u0.len());
    let load = |n: usize| Benchmark::temporal(n as f64 * dt) * &force;
    let (_, u) = lf.run(&u0, &v0, &load, steps, |_, _, _| {})?;
    Ok((disc, part.expand_zero(&u)))
}

/// Step count for `t_end` with the largest step not above `dt_max` and the
/// CFL bound.
pub fn benchmark_steps(mesh: &PolygonalMesh, k: usize, material: &Material, courant: f64, dt_max: f64, t_end: f64) -> usize {
    let dt = cfl_time_step(mesh, k, material, courant).min(dt_max);
    (t_end / dt).ceil().max(1.0) as usize
}

/// Benchmark over a mesh sequence; columns L2, H1.
pub fn run_benchmark_convergence(
    meshes: &[PolygonalMesh],
    k: usize,
    kind: BasisKind,
    material: Material,
    init: InitialData,
    dt_max: f64,
    t_end: f64,
) -> Result<ConvergenceTable> {
    let mut table = ConvergenceTable::new(&["L2", "H1"]);
    for mesh in meshes {
        let steps = benchmark_steps(mesh, k, &material, DEFAULT_CFL, dt_max, t_end);
        let r = run_benchmark(mesh, k, kind, material, init, t_end, steps)?;
        table.push(r.h, r.dofs, vec![Some(r.l2), Some(r.h1)]);
    }
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PRefinementRow {
    pub k: usize,
    pub dofs: usize,
    pub l2: f64,
    pub h1: f64,
    /// Condition number of the reduced stiffness matrix.
    pub cond: f64,
}

/// Benchmark for k = 1..=k_max on one mesh.
pub fn run_p_refinement(
    mesh: &PolygonalMesh,
    k_max: usize,
    kind: BasisKind,
    material: Material,
    init: InitialData,
    dt_max: f64,
    t_end: f64,
) -> Result<Vec<PRefinementRow>> {
    (1..=k_max)
        .map(|k| {
            let steps = benchmark_steps(mesh, k, &material, DEFAULT_CFL, dt_max, t_end);
            let r = run_benchmark(mesh, k, kind, material, init, t_end, steps)?;
            let cond = ElasticDiscretization::new(mesh, k, kind, material)?.stiffness_condition(mesh);
            Ok(PRefinementRow { k, dofs: r.dofs, l2: r.l2, h1: r.h1, cond })
        })
        .collect()
}

pub fn p_refinement_csv(rows: &[PRefinementRow]) -> String {
    let mut out = String::from("k,dofs,errL2,errH1,cond\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.16e},{:.16e},{:.16e}\n", r.k, r.dofs, r.l2, r.h1, r.cond));
    }
    out
}

#[cfg(test)]
mod tests;
