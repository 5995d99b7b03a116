//! Backward Euler + Newton integration of the Cahn-Hilliard equation
//! `u_t - lap(phi(u) - gamma^2 lap u) = f`, `phi(u) = u^3 - u`, with
//! `d_n u = d_n(phi(u) - gamma^2 lap u) = 0`, on the reduced C1 space.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::convergence::ConvergenceTable;
use crate::field::ScalarField;
use crate::la_core::{
    newton_solve, newton_solve_with, Assembler, DofPartition, LaError, NewtonReport, NewtonSettings, SparseLu, SparseMatrix,
};
use crate::mesh::PolygonalMesh;
use crate::vem_c1::C1Discretization;
use crate::{Error, Result, Vec2};

/// Relative Newton tolerance on the l2 residual.
pub const NEWTON_TOL: f64 = 1e-6;

/// How the Newton Jacobian is refreshed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum JacobianUpdate {
    /// Reassemble and refactorize at every iteration.
    #[default]
    Exact,
    /// Keep the last factorization across iterations and time steps as
    /// long as every iteration reduces the residual by at least a factor 4.
    Lazy,
}

/// Discretized problem on a fixed mesh. Unknowns are the free DOFs, i.e.
/// all DOFs except the boundary-normal gradient components.
pub struct CahnHilliard {
    disc: C1Discretization,
    gamma: f64,
    partition: DofPartition,
    reduced: Assembler,
    mass: SparseMatrix,
    hessian: SparseMatrix,
    settings: NewtonSettings,
    update: JacobianUpdate,
    frozen: RefCell<Option<Frozen>>,
}

/// Factorization kept by the lazy update.
struct Frozen {
    dt: f64,
    lu: SparseLu,
}

/// Outcome of one time step.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub newton: NewtonReport,
    /// Number of sub-steps taken (2 when the step had to be halved).
    pub substeps: usize,
}

impl CahnHilliard {
    pub fn new(mesh: &PolygonalMesh, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("interface parameter must be positive, got {gamma}")));
        }
        let disc = C1Discretization::new(mesh)?;
        let partition = DofPartition::new(&disc.neumann_mask(mesh)?);
        let cell_dofs =
            (0..disc.n_cells()).map(|c| disc.cell_dofs(c).iter().map(|&d| partition.reduced_index(d)).collect()).collect();
        let reduced = Assembler::new(partition.n_free(), cell_dofs);
        let mass = reduced.assemble(&disc.spaces().iter().map(|s| s.a_zero().clone()).collect::<Vec<_>>());
        let hessian = reduced.assemble(&disc.spaces().iter().map(|s| s.a_delta().clone()).collect::<Vec<_>>());
        let settings = NewtonSettings { rel_tol: NEWTON_TOL, ..NewtonSettings::default() };
        Ok(Self {
            disc,
            gamma,
            partition,
            reduced,
            mass,
            hessian,
            settings,
            update: JacobianUpdate::Exact,
            frozen: RefCell::new(None),
        })
    }

    pub fn discretization(&self) -> &C1Discretization {
        &self.disc
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn partition(&self) -> &DofPartition {
        &self.partition
    }

    pub fn newton_settings_mut(&mut self) -> &mut NewtonSettings {
        &mut self.settings
    }

    pub fn set_jacobian_update(&mut self, update: JacobianUpdate) {
        self.update = update;
        self.frozen.replace(None);
    }

    /// Reduced mass matrix `A0` (free DOFs only).
    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    /// Full DOF vector of a reduced one.
    pub fn expand(&self, x: &DVector<f64>) -> DVector<f64> {
        self.partition.expand_zero(x)
    }

    /// Load `int f Pi0 v` restricted to the free DOFs.
    pub fn load(&self, f: impl Fn(Vec2) -> f64 + Sync) -> DVector<f64> {
        self.partition.restrict(&self.disc.load(f))
    }

    fn local_states(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        // constrained DOFs are zero
        (0..self.disc.n_cells())
            .map(|c| {
                let d = self.reduced.cell_dofs(c);
                DVector::from_iterator(d.len(), d.iter().map(|i| i.map_or(0.0, |i| x[i])))
            })
            .collect()
    }

    /// `sum_P w_P(u) A_nabla,P u` on the free DOFs.
    pub fn semilinear(&self, x: &DVector<f64>) -> DVector<f64> {
        let states = self.local_states(x);
        let locals: Vec<DVector<f64>> = self.disc.spaces().par_iter().zip(&states).map(|(s, u)| s.semilinear_action(u)).collect();
        self.reduced.assemble_vector(&locals)
    }

    fn linear_part(&self, dt: f64) -> SparseMatrix {
        // mass and Hessian forms share the assembler's pattern
        let mut m = self.mass.clone();
        for (v, h) in m.values_mut().iter_mut().zip(self.hessian.values()) {
            *v = *v / dt + self.gamma * self.gamma * h;
        }
        m
    }

    /// Residual of the backward Euler equation at `x` given the previous
    /// state and the load at the new time level.
    pub fn residual(&self, x: &DVector<f64>, prev: &DVector<f64>, dt: f64, load: &DVector<f64>) -> DVector<f64> {
        let lin = self.linear_part(dt);
        lin.mul_vec(x) - self.mass.mul_vec(prev) / dt + self.semilinear(x) - load
    }

    pub fn jacobian(&self, x: &DVector<f64>, dt: f64) -> SparseMatrix {
        let mut j = self.linear_part(dt);
        self.add_semilinear_jacobian(&mut j, x);
        j
    }

    fn add_semilinear_jacobian(&self, j: &mut SparseMatrix, x: &DVector<f64>) {
        let states = self.local_states(x);
        let locals: Vec<DMatrix<f64>> =
            self.disc.spaces().par_iter().zip(&states).map(|(s, u)| s.semilinear_jacobian(u)).collect();
        self.reduced.add_into(j, &locals);
    }

    fn newton(
        &self,
        prev: &DVector<f64>,
        dt: f64,
        load: &DVector<f64>,
    ) -> std::result::Result<(DVector<f64>, NewtonReport), LaError> {
        let lin = self.linear_part(dt);
        let old = self.mass.mul_vec(prev) / dt;
        // a state that is already a root up to roundoff must not need iterations
        let floor = 1e-12 * (old.norm() + load.norm());
        let settings = NewtonSettings { abs_tol: self.settings.abs_tol.max(floor), ..self.settings };
        let residual = |x: &DVector<f64>| Ok(lin.mul_vec(x) - &old + self.semilinear(x) - load);
        let jacobian = |x: &DVector<f64>| {
            let mut j = lin.clone();
            self.add_semilinear_jacobian(&mut j, x);
            j
        };
        if self.update == JacobianUpdate::Exact {
            return newton_solve(residual, |x| Ok(jacobian(x)), prev.clone(), &settings);
        }
        let mut last_norm = f64::INFINITY;
        let step = |x: &DVector<f64>, r: &DVector<f64>| {
            let norm = r.norm();
            let mut frozen = self.frozen.borrow_mut();
            let stale = match frozen.as_ref() {
                Some(f) => f.dt != dt || norm > 0.25 * last_norm,
                None => true,
            };
            if stale {
                let j = jacobian(x);
                match frozen.as_mut() {
                    Some(f) => {
                        f.lu.refactorize(&j)?;
                        f.dt = dt;
                    }
                    None => *frozen = Some(Frozen { dt, lu: SparseLu::factorize(&j)? }),
                }
            }
            last_norm = norm;
            frozen.as_ref().expect("factorized").lu.solve(r)
        };
        newton_solve_with(residual, step, prev.clone(), &settings)
    }

    /// One backward Euler step from `prev` (reduced). `load(t)` gives the
    /// reduced load at a time level; `t` is the new time. If Newton fails
    /// the step is retried once as two half steps.
    pub fn step(
        &self,
        prev: &DVector<f64>,
        t: f64,
        dt: f64,
        load: &dyn Fn(f64) -> DVector<f64>,
    ) -> Result<(DVector<f64>, StepReport)> {
        match self.newton(prev, dt, &load(t)) {
            Ok((x, newton)) => Ok((x, StepReport { newton, substeps: 1 })),
            Err(LaError::NotConverged { .. }) => {
                let half = 0.5 * dt;
                let (mid, r1) = self.newton(prev, half, &load(t - half))?;
                let (x, r2) = self.newton(&mid, half, &load(t))?;
                let mut newton = r1;
                newton.iterations += r2.iterations;
                newton.halvings += r2.halvings;
                newton.residuals.extend(r2.residuals);
                Ok((x, StepReport { newton, substeps: 2 }))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// `A0`-pairing of a reduced state with the constant 1 (total mass).
    pub fn mass_of(&self, x: &DVector<f64>) -> f64 {
        let one = self.partition.restrict(&self.disc.constant(1.0));
        self.mass.bilinear(&one, x)
    }

    /// Discrete Ginzburg-Landau energy `gamma^2/2 |u|^2_{h,1} + sum_P |P| psi_P`
    /// with `psi_P = (1 - m_P)^2 / 4` and `m_P = |P|^-1 a0_h(u, u)` the cell
    /// average of `u^2`.
    pub fn energy(&self, x: &DVector<f64>) -> f64 {
        let states = self.local_states(x);
        let (grad, bulk) = self
            .disc
            .spaces()
            .par_iter()
            .zip(&states)
            .map(|(s, u)| {
                let area = s.cell().area();
                let m = u.dot(&(s.a_zero() * u)) / area;
                (u.dot(&(s.a_nabla() * u)), area * (1.0 - m).powi(2) / 4.0)
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        0.5 * self.gamma * self.gamma * grad + bulk
    }
}

/// `cos(2 pi x) cos(2 pi y)`
fn mode(p: Vec2) -> (f64, Vec2, Matrix2<f64>) {
    let (cx, sx) = ((2.0 * PI * p.x).cos(), (2.0 * PI * p.x).sin());
    let (cy, sy) = ((2.0 * PI * p.y).cos(), (2.0 * PI * p.y).sin());
    let k = 2.0 * PI;
    let xy = k * k * sx * sy;
    (cx * cy, Vec2::new(-k * sx * cy, -k * cx * sy), Matrix2::new(-k * k * cx * cy, xy, xy, -k * k * cx * cy))
}

/// The manufactured solution `u = t cos(2 pi x) cos(2 pi y)`.
#[derive(Clone, Copy, Debug)]
pub struct Manufactured {
    pub t: f64,
}

impl ScalarField for Manufactured {
    fn value(&self, p: Vec2) -> f64 {
        self.t * mode(p).0
    }
    fn gradient(&self, p: Vec2) -> Vec2 {
        self.t * mode(p).1
    }
    fn hessian(&self, p: Vec2) -> Matrix2<f64> {
        self.t * mode(p).2
    }
}

impl Manufactured {
    /// The load is `a(t) psi(x) + b(t) c(x)` with `c = -lap(psi^3)`;
    /// returns `(a, b)`.
    fn source_parts(gamma: f64, t: f64) -> (f64, f64) {
        let k2 = 8.0 * PI * PI;
        // lap psi = -k2 psi; u_t + t lap psi + gamma^2 t lap^2 psi = psi (1 - k2 t + gamma^2 k2^2 t)
        (1.0 - k2 * t + gamma * gamma * k2 * k2 * t, t * t * t)
    }

    /// `-lap(psi^3)`, the spatial factor of the cubic-in-time load term.
    fn cubic_source(p: Vec2) -> f64 {
        let (psi, g, _) = mode(p);
        let k2 = 8.0 * PI * PI;
        // lap(psi^3) = 3 psi^2 lap psi + 6 psi |grad psi|^2, lap psi = -k2 psi
        3.0 * k2 * psi.powi(3) - 6.0 * psi * g.norm_squared()
    }

    /// Pointwise load `f(x, t)`.
    pub fn source(gamma: f64, t: f64, p: Vec2) -> f64 {
        let (a, b) = Self::source_parts(gamma, t);
        a * mode(p).0 + b * Self::cubic_source(p)
    }
}

/// Errors at the final time (H2, H1 seminorms and L2 norm).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedRun {
    pub h: f64,
    pub dofs: usize,
    pub h2: f64,
    pub h1: f64,
    pub l2: f64,
    pub steps: usize,
    pub max_newton: usize,
}

/// Integrates the manufactured problem from `u(0) = 0` up to `t_end`.
/// The solution stays small, so the lazy Jacobian update is used: one
/// factorization then serves many steps.
pub fn run_manufactured(mesh: &PolygonalMesh, gamma: f64, dt: f64, t_end: f64) -> Result<ManufacturedRun> {
    run_manufactured_with(mesh, gamma, dt, t_end, JacobianUpdate::Lazy)
}

pub fn run_manufactured_with(
    mesh: &PolygonalMesh,
    gamma: f64,
    dt: f64,
    t_end: f64,
    update: JacobianUpdate,
) -> Result<ManufacturedRun> {
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(Error::InvalidInput(format!("time step {dt} and final time {t_end} must be positive")));
    }
    let mut ch = CahnHilliard::new(mesh, gamma)?;
    ch.set_jacobian_update(update);
    let psi_load = ch.load(|p| mode(p).0);
    let cubic_load = ch.load(Manufactured::cubic_source);
    let load = |t: f64| {
        let (a, b) = Manufactured::source_parts(gamma, t);
        a * &psi_load + b * &cubic_load
    };
    let steps = (t_end / dt).round() as usize;
    let mut x = DVector::zeros(ch.partition().n_free());
    let mut max_newton = 0;
    for i in 1..=steps {
        let (next, report) = ch.step(&x, i as f64 * dt, dt, &load)?;
        max_newton = max_newton.max(report.newton.iterations);
        x = next;
    }
    let e = ch.discretization().errors(&ch.expand(&x), &Manufactured { t: steps as f64 * dt });
    Ok(ManufacturedRun { h: mesh.max_diameter(), dofs: ch.partition().n_free(), h2: e.h2, h1: e.h1, l2: e.l2, steps, max_newton })
}

/// Manufactured runs over a mesh sequence; columns H2, H1, L2.
pub fn run_manufactured_convergence(meshes: &[PolygonalMesh], gamma: f64, dt: f64, t_end: f64) -> Result<ConvergenceTable> {
    let mut table = ConvergenceTable::new(&["H2", "H1", "L2"]);
    for mesh in meshes {
        let r = run_manufactured(mesh, gamma, dt, t_end)?;
        table.push(r.h, r.dofs, vec![Some(r.h2), Some(r.h1), Some(r.l2)]);
    }
    Ok(table)
}

/// Spinodal decomposition history.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinodalRun {
    /// `(step, vertex values)` for every saved frame (step 0 included).
    pub frames: Vec<(usize, Vec<f64>)>,
    /// Total mass after every step (index 0: initial state).
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    pub newton_iterations: Vec<usize>,
    pub min_value: f64,
    pub max_value: f64,
}

/// Random initial state: vertex values uniform in [-1, 1], gradients zero.
pub fn random_initial_state(ch: &CahnHilliard, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ch.discretization().n_dofs();
    let full = DVector::from_fn(n, |i, _| if i % 3 == 0 { rng.random_range(-1.0..=1.0) } else { 0.0 });
    ch.partition().restrict(&full)
}

/// Phase separation from a random state, saving a frame every
/// `frame_every` steps (and the last one).
pub fn run_spinodal(
    mesh: &PolygonalMesh,
    gamma: f64,
    dt: f64,
    n_steps: usize,
    seed: u64,
    frame_every: usize,
) -> Result<SpinodalRun> {
    let ch = CahnHilliard::new(mesh, gamma)?;
    let zero = DVector::zeros(ch.partition().n_free());
    let load = |_: f64| zero.clone();
    let mut x = random_initial_state(&ch, seed);
    let values = |x: &DVector<f64>| ch.expand(x).iter().step_by(3).copied().collect::<Vec<f64>>();
    let mut run = SpinodalRun {
        frames: vec![(0, values(&x))],
        mass: vec![ch.mass_of(&x)],
        energy: vec![ch.energy(&x)],
        newton_iterations: Vec::new(),
        min_value: f64::INFINITY,
        max_value: f64::NEG_INFINITY,
    };
    for i in 1..=n_steps {
        let (next, report) = ch.step(&x, i as f64 * dt, dt, &load)?;
        x = next;
        run.mass.push(ch.mass_of(&x));
        run.energy.push(ch.energy(&x));
        run.newton_iterations.push(report.newton.iterations);
        let v = values(&x);
        for &y in &v {
            run.min_value = run.min_value.min(y);
            run.max_value = run.max_value.max(y);
        }
        if i == n_steps || (frame_every > 0 && i % frame_every == 0) {
            run.frames.push((i, v));
        }
    }
    Ok(run)
}

/// Writes one frame as `x y value` lines.
pub fn write_frame(path: &Path, mesh: &PolygonalMesh, values: &[f64]) -> std::io::Result<()> {
    let mut out = String::new();
    for (p, v) in mesh.vertices().iter().zip(values) {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, v);
    }
    std::fs::write(path, out)
}
