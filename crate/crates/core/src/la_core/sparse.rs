use nalgebra::{DMatrix, DVector};

use super::LaError;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// A batch of `(row, col, value)` entries. Batches built independently (for
/// instance per thread) combine with [`Triplets::merge`], which is
/// associative and commutative up to entry order, and summation of
/// duplicates happens only at finalization.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    /// Adds `local[(i, j)]` at `(rows[i], cols[j])`, skipping `None` indices.
    pub fn add_block(&mut self, rows: &[Option<usize>], cols: &[Option<usize>], local: &DMatrix<f64>) {
        for (j, cj) in cols.iter().enumerate() {
            let Some(cj) = *cj else { continue };
            for (i, ri) in rows.iter().enumerate() {
                if let Some(ri) = *ri {
                    self.entries.push((ri, cj, local[(i, j)]));
                }
            }
        }
    }

    pub fn merge(mut self, mut other: Triplets) -> Triplets {
        if self.entries.len() < other.entries.len() {
            std::mem::swap(&mut self, &mut other);
        }
        self.entries.extend(other.entries);
        self
    }
}

/// Square assembly: duplicates summed, exact zeros dropped.
pub fn assemble(triplets: &Triplets, dim: usize) -> Result<SparseMatrix, LaError> {
    SparseMatrix::from_triplets(dim, dim, &triplets.entries)
}

impl SparseMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Result<Self, LaError> {
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= nrows || c >= ncols) {
            return Err(LaError::IndexOutOfRange { row: r, col: c, nrows, ncols });
        }
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in entries {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; entries.len()];
        let mut vals = vec![0.0; entries.len()];
        for &(r, c, v) in entries {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            buf.clear();
            buf.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            buf.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < buf.len() {
                let c = buf[k].0;
                let mut s = 0.0;
                while k < buf.len() && buf[k].0 == c {
                    s += buf[k].1;
                    k += 1;
                }
                if s != 0.0 {
                    col_idx.push(c);
                    values.push(s);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    /// Builds from raw CSR arrays; column indices must be sorted per row.
    pub fn from_csr(nrows: usize, ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(row_ptr.len(), nrows + 1);
        debug_assert_eq!(col_idx.len(), values.len());
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_csr(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_csr(nrows, ncols, vec![0; nrows + 1], Vec::new(), Vec::new())
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &t).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in matvec");
        DVector::from_iterator(self.nrows, (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()))
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&self.mul_vec(y))
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t: Vec<_> = (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v))).collect();
        Self::from_triplets(self.ncols, self.nrows, &t).expect("in range")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                d[(r, c)] += v;
            }
        }
        d
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `alpha A + beta B` (general patterns).
    pub fn linear_combination(alpha: f64, a: &SparseMatrix, beta: f64, b: &SparseMatrix) -> SparseMatrix {
        assert_eq!((a.nrows, a.ncols), (b.nrows, b.ncols));
        if a.row_ptr == b.row_ptr && a.col_idx == b.col_idx {
            let mut out = a.clone();
            for (o, v) in out.values.iter_mut().zip(&b.values) {
                *o = alpha * *o + beta * v;
            }
            return out;
        }
        let mut t: Vec<_> = (0..a.nrows).flat_map(|r| a.row(r).map(move |(c, v)| (r, c, alpha * v))).collect();
        t.extend((0..b.nrows).flat_map(|r| b.row(r).map(move |(c, v)| (r, c, beta * v))));
        Self::from_triplets(a.nrows, a.ncols, &t).expect("in range")
    }

    /// Maximal |A - A^T| relative to max |A|.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst / scale
    }

    /// Sub-matrix selecting rows and columns through index maps
    /// (`map[i] = Some(new index)`).
    pub fn restrict(&self, row_map: &[Option<usize>], nrows: usize, col_map: &[Option<usize>], ncols: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for r in 0..self.nrows {
            let Some(nr) = row_map[r] else { continue };
            for (c, v) in self.row(r) {
                if let Some(nc) = col_map[c] {
                    t.push((nr, nc, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &t).expect("maps in range")
    }

    /// Index of the first structurally empty row or column, if any.
    pub fn first_empty_line(&self) -> Option<usize> {
        let mut col_seen = vec![false; self.ncols];
        let mut first_row = None;
        for r in 0..self.nrows {
            let mut any = false;
            for (c, v) in self.row(r) {
                if v != 0.0 {
                    any = true;
                    col_seen[c] = true;
                }
            }
            if !any && first_row.is_none() {
                first_row = Some(r);
            }
        }
        let first_col = col_seen.iter().position(|s| !s);
        match (first_row, first_col) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Estimate of the largest eigenvalue of the pencil (A, M) or of A when
    /// `m_solve` is the identity, by power iteration.
    pub fn power_iteration(&self, m_solve: impl Fn(&DVector<f64>) -> DVector<f64>, iters: usize) -> f64 {
        let n = self.nrows;
        let mut x = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 113) as f64 / 113.0);
        x /= x.norm();
        let mut lambda = 0.0;
        for _ in 0..iters {
            let y = m_solve(&self.mul_vec(&x));
            let norm = y.norm();
            if norm == 0.0 {
                return 0.0;
            }
            lambda = x.dot(&y);
            x = y / norm;
        }
        lambda.max(0.0)
    }
}

/// Fast repeated assembly into a fixed pattern: each cell's local matrix is
/// scattered through precomputed value positions.
#[derive(Clone, Debug)]
pub struct Assembler {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    cell_dofs: Vec<Vec<Option<usize>>>,
    positions: Vec<Vec<usize>>,
}

const SKIP: usize = usize::MAX;

impl Assembler {
    /// `cell_dofs[c][i]` is the global (possibly reduced) index of local DOF
    /// `i` of cell `c`, `None` for eliminated DOFs.
    pub fn new(n: usize, cell_dofs: Vec<Vec<Option<usize>>>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for dofs in &cell_dofs {
            for r in dofs.iter().flatten() {
                rows[*r].extend(dofs.iter().flatten());
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let positions = cell_dofs
            .iter()
            .map(|dofs| {
                let m = dofs.len();
                let mut pos = vec![SKIP; m * m];
                for (i, ri) in dofs.iter().enumerate() {
                    let Some(r) = *ri else { continue };
                    let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
                    for (j, cj) in dofs.iter().enumerate() {
                        if let Some(c) = *cj {
                            pos[i * m + j] = row_ptr[r] + cols.binary_search(&c).expect("pattern contains entry");
                        }
                    }
                }
                pos
            })
            .collect();
        Self { n, row_ptr, col_idx, cell_dofs, positions }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn cell_dofs(&self, c: usize) -> &[Option<usize>] {
        &self.cell_dofs[c]
    }

    /// Zero matrix with the assembly pattern.
    pub fn pattern(&self) -> SparseMatrix {
        SparseMatrix::from_csr(self.n, self.n, self.row_ptr.clone(), self.col_idx.clone(), vec![0.0; self.col_idx.len()])
    }

    /// Adds local matrices (one per cell) into `target`, which must carry
    /// this assembler's pattern.
    pub fn add_into(&self, target: &mut SparseMatrix, locals: &[DMatrix<f64>]) {
        assert_eq!(locals.len(), self.cell_dofs.len());
        let vals = target.values_mut();
        for (pos, local) in self.positions.iter().zip(locals) {
            let m = local.nrows();
            for i in 0..m {
                for j in 0..m {
                    let p = pos[i * m + j];
                    if p != SKIP {
                        vals[p] += local[(i, j)];
                    }
                }
            }
        }
    }

    pub fn assemble(&self, locals: &[DMatrix<f64>]) -> SparseMatrix {
        let mut a = self.pattern();
        self.add_into(&mut a, locals);
        a
    }

    pub fn assemble_vector(&self, locals: &[DVector<f64>]) -> DVector<f64> {
        let mut b = DVector::zeros(self.n);
        for (dofs, local) in self.cell_dofs.iter().zip(locals) {
            for (i, d) in dofs.iter().enumerate() {
                if let Some(d) = *d {
                    b[d] += local[i];
                }
            }
        }
        b
    }
}
