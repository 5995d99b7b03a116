use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::linalg::{LltError, LuError};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat, Side};
use nalgebra::DVector;

use super::{LaError, SparseMatrix};

/// The CSR arrays of `A` are the CSC arrays of `A^T`.
fn transposed_csc(a: &SparseMatrix) -> SparseColMat<usize, f64> {
    let sym = SymbolicSparseColMat::new_checked(a.ncols(), a.nrows(), a.row_ptr().to_vec(), None, a.col_idx().to_vec());
    SparseColMat::new(sym, a.values().to_vec())
}

fn check_square(a: &SparseMatrix) -> Result<(), LaError> {
    if a.nrows() != a.ncols() {
        return Err(LaError::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
    }
    if let Some(i) = a.first_empty_line() {
        return Err(LaError::Singular { pivot: i });
    }
    Ok(())
}

fn to_mat(b: &DVector<f64>) -> Mat<f64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

fn from_mat(x: &Mat<f64>) -> Result<DVector<f64>, LaError> {
    let v = DVector::from_fn(x.nrows(), |i, _| x[(i, 0)]);
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(LaError::Singular { pivot: i }),
        None => Ok(v),
    }
}

/// Sparse LU factorization; the symbolic analysis is reused when the
/// sparsity pattern does not change between factorizations.
pub struct SparseLu {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: SymbolicLu<usize>,
    numeric: Lu<usize, f64>,
}

impl SparseLu {
    pub fn factorize(a: &SparseMatrix) -> Result<Self, LaError> {
        check_square(a)?;
        let at = transposed_csc(a);
        let symbolic = SymbolicLu::try_new(at.symbolic()).map_err(|e| LaError::Factorization(format!("{e:?}")))?;
        let numeric = Self::numeric(symbolic.clone(), &at)?;
        Ok(Self { n: a.nrows(), row_ptr: a.row_ptr().to_vec(), col_idx: a.col_idx().to_vec(), symbolic, numeric })
    }

    fn numeric(symbolic: SymbolicLu<usize>, at: &SparseColMat<usize, f64>) -> Result<Lu<usize, f64>, LaError> {
        Lu::try_new_with_symbolic(symbolic, at.as_ref()).map_err(|e| match e {
            LuError::SymbolicSingular { index } => LaError::Singular { pivot: index },
            other => LaError::Factorization(format!("{other:?}")),
        })
    }

    /// New numeric factorization of `a`, reusing the symbolic analysis when
    /// the pattern is unchanged.
    pub fn refactorize(&mut self, a: &SparseMatrix) -> Result<(), LaError> {
        if a.nrows() != self.n || a.row_ptr() != self.row_ptr.as_slice() || a.col_idx() != self.col_idx.as_slice() {
            *self = Self::factorize(a)?;
            return Ok(());
        }
        check_square(a)?;
        self.numeric = Self::numeric(self.symbolic.clone(), &transposed_csc(a))?;
        Ok(())
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>, LaError> {
        if b.len() != self.n {
            return Err(LaError::DimensionMismatch { expected: self.n, found: b.len() });
        }
        let mut x = to_mat(b);
        self.numeric.solve_transpose_in_place_with_conj(Conj::No, x.as_mut());
        from_mat(&x)
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SparseCholesky {
    n: usize,
    numeric: Llt<usize, f64>,
}

impl SparseCholesky {
    pub fn factorize(a: &SparseMatrix) -> Result<Self, LaError> {
        check_square(a)?;
        let asym = a.asymmetry();
        if asym > 1e-10 {
            return Err(LaError::NotSymmetric { relative: asym });
        }
        let at = transposed_csc(a);
        let symbolic = SymbolicLlt::try_new(at.symbolic(), Side::Lower).map_err(|e| LaError::Factorization(format!("{e:?}")))?;
        let numeric = Llt::try_new_with_symbolic(symbolic, at.as_ref(), Side::Lower).map_err(|e| match e {
            LltError::Numeric(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index }) => {
                LaError::NotPositiveDefinite { pivot: index }
            }
            other => LaError::Factorization(format!("{other:?}")),
        })?;
        Ok(Self { n: a.nrows(), numeric })
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>, LaError> {
        if b.len() != self.n {
            return Err(LaError::DimensionMismatch { expected: self.n, found: b.len() });
        }
        let mut x = to_mat(b);
        self.numeric.solve_in_place_with_conj(Conj::No, x.as_mut());
        from_mat(&x)
    }
}

/// One-shot sparse LU solve.
pub fn solve_direct(a: &SparseMatrix, b: &DVector<f64>) -> Result<DVector<f64>, LaError> {
    SparseLu::factorize(a)?.solve(b)
}

/// Unpreconditioned conjugate gradients (cross-validation of direct solves).
pub fn conjugate_gradient(a: &SparseMatrix, b: &DVector<f64>, rel_tol: f64, max_iter: usize) -> Result<DVector<f64>, LaError> {
    let mut x = DVector::zeros(b.len());
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let target = rel_tol * b.norm();
    for _ in 0..max_iter {
        if rr.sqrt() <= target {
            return Ok(x);
        }
        let ap = a.mul_vec(&p);
        let alpha = rr / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rr_new = r.dot(&r);
        p = &r + (rr_new / rr) * &p;
        rr = rr_new;
    }
    if rr.sqrt() <= target {
        Ok(x)
    } else {
        Err(LaError::NotConverged { iterations: max_iter, residual: rr.sqrt() / b.norm() })
    }
}
