//! Sparse assembly, direct solvers, constraint elimination and Newton.

mod newton;
mod solve;
mod sparse;

use nalgebra::DVector;

pub use newton::{newton_solve, newton_solve_with, NewtonReport, NewtonSettings};
pub use solve::{conjugate_gradient, solve_direct, SparseCholesky, SparseLu};
pub use sparse::{assemble, Assembler, SparseMatrix, Triplets};

#[derive(Debug, thiserror::Error)]
pub enum LaError {
    #[error("entry ({row}, {col}) outside a {nrows}x{ncols} matrix")]
    IndexOutOfRange { row: usize, col: usize, nrows: usize, ncols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular matrix (pivot {pivot})")]
    Singular { pivot: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("symmetric factorization requested for a matrix with relative asymmetry {relative:e}")]
    NotSymmetric { relative: f64 },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Split of the unknowns into free and prescribed (Dirichlet-type) ones.
#[derive(Clone, Debug, PartialEq)]
pub struct DofPartition {
    reduced: Vec<Option<usize>>,
    free: Vec<usize>,
    fixed_map: Vec<Option<usize>>,
    n_fixed: usize,
}

impl DofPartition {
    pub fn new(constrained: &[bool]) -> Self {
        let mut reduced = vec![None; constrained.len()];
        let mut fixed_map = vec![None; constrained.len()];
        let mut free = Vec::new();
        let mut n_fixed = 0;
        for (i, &c) in constrained.iter().enumerate() {
            if c {
                fixed_map[i] = Some(n_fixed);
                n_fixed += 1;
            } else {
                reduced[i] = Some(free.len());
                free.push(i);
            }
        }
        Self { reduced, free, fixed_map, n_fixed }
    }

    pub fn unconstrained(n: usize) -> Self {
        Self::new(&vec![false; n])
    }

    pub fn n_total(&self) -> usize {
        self.reduced.len()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn is_free(&self, i: usize) -> bool {
        self.reduced[i].is_some()
    }

    /// Reduced index of global DOF `i` (None when constrained).
    pub fn reduced_index(&self, i: usize) -> Option<usize> {
        self.reduced[i]
    }

    pub fn reduced_map(&self) -> &[Option<usize>] {
        &self.reduced
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn restrict(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| full[i]))
    }

    /// Full vector from free values and prescribed values (read from `fixed`
    /// at the constrained positions).
    pub fn expand(&self, reduced: &DVector<f64>, fixed: &DVector<f64>) -> DVector<f64> {
        let mut out = fixed.clone();
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = reduced[k];
        }
        out
    }

    pub fn expand_zero(&self, reduced: &DVector<f64>) -> DVector<f64> {
        self.expand(reduced, &DVector::zeros(self.n_total()))
    }

    /// Row/column elimination: returns `A_ff` and `b_f - A_fc g_c`, where
    /// `g` holds the prescribed values at constrained positions.
    pub fn eliminate(&self, a: &SparseMatrix, b: &DVector<f64>, g: &DVector<f64>) -> (SparseMatrix, DVector<f64>) {
        let aff = a.restrict(&self.reduced, self.n_free(), &self.reduced, self.n_free());
        let mut rhs = self.restrict(b);
        if self.n_fixed > 0 && g.iter().any(|&v| v != 0.0) {
            let afc = a.restrict(&self.reduced, self.n_free(), &self.fixed_map, self.n_fixed);
            let gc =
                DVector::from_iterator(self.n_fixed, (0..self.n_total()).filter(|&i| self.fixed_map[i].is_some()).map(|i| g[i]));
            rhs -= afc.mul_vec(&gc);
        }
        (aff, rhs)
    }
}
