//! Compressed-row sparse matrices and the direct solver for slab systems.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Residual tolerance every direct solve is checked against.
pub const SOLVE_TOLERANCE: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` entries, summing duplicates.
    /// Summation order follows the input order, so equal inputs give
    /// bitwise-equal matrices.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in entries {
            if r >= nrows || c >= ncols {
                return Err(Error::ShapeMismatch {
                    expected: format!("{nrows}x{ncols}"),
                    got: format!("entry ({r}, {c})"),
                });
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // stable bucket sort by row
        let mut order = vec![0usize; entries.len()];
        let mut next = counts.clone();
        for (k, &(r, _, _)) in entries.iter().enumerate() {
            order[next[r]] = k;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend(order[counts[r]..counts[r + 1]].iter().map(|&k| (entries[k].1, entries[k].2)));
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let entries: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, &v)| (i, j, v)))
            .collect();
        Self::from_triplets(nrows, ncols, &entries).expect("in range")
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    fn check_len(expected: usize, got: usize) -> Result<()> {
        if expected != got {
            return Err(Error::ShapeMismatch {
                expected: expected.to_string(),
                got: got.to_string(),
            });
        }
        Ok(())
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        Self::check_len(self.ncols, x.len())?;
        Ok((0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect())
    }

    /// `A^T x`. Each output entry accumulates in increasing row order, the
    /// same order [`CsrMatrix::transpose`] stores them in, so the result is
    /// bitwise equal to `transpose().spmv(x)`.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        Self::check_len(self.nrows, x.len())?;
        let mut out = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                out[j] += v * xi;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let entries: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &entries).expect("in range")
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &Self, factor: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.nrows, self.ncols),
                got: format!("{}x{}", other.nrows, other.ncols),
            });
        }
        let entries: Vec<_> = self
            .triplets()
            .chain(other.triplets().map(|(i, j, v)| (i, j, factor * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &entries)
    }

    /// Submatrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let entries: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(k, &r)| {
                let col_map = &col_map;
                self.row(r).filter_map(move |(c, v)| (col_map[c] != usize::MAX).then_some((k, col_map[c], v)))
            })
            .collect();
        Self::from_triplets(rows.len(), cols.len(), &entries).expect("in range")
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a_ij - a_ji| / max |a_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let ax = self.spmv(x).expect("square");
        ax.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Accumulates entries for a large matrix assembled from blocks.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i, j, v));
    }

    /// Adds `factor * block` with its top-left corner at `(row, col)`.
    pub fn add_block(&mut self, row: usize, col: usize, block: &CsrMatrix, factor: f64) -> Result<()> {
        if row + block.nrows > self.nrows || col + block.ncols > self.ncols {
            return Err(Error::ShapeMismatch {
                expected: format!("block inside {}x{}", self.nrows, self.ncols),
                got: format!("{}x{} at ({row}, {col})", block.nrows, block.ncols),
            });
        }
        if factor == 0.0 {
            return Ok(());
        }
        self.entries
            .extend(block.triplets().map(|(i, j, v)| (row + i, col + j, factor * v)));
        Ok(())
    }

    pub fn build(&self) -> Result<CsrMatrix> {
        CsrMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}

/// Row/column partition of a block system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for s in &sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Self { sizes, offsets }
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, block: usize) -> usize {
        self.sizes[block]
    }

    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, block: usize) -> std::ops::Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }
}

/// A square block system with its layout.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub layout: BlockLayout,
    pub matrix: CsrMatrix,
}

enum Factor {
    Llt(faer::sparse::linalg::solvers::Llt<usize, f64>),
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

/// Sparse direct factorization with fill-reducing ordering. Symmetric
/// positive definite matrices get a Cholesky factor, everything else (or a
/// failed Cholesky) falls back to LU. Every solve checks the relative
/// residual against [`SOLVE_TOLERANCE`].
pub struct LuSolver {
    matrix: CsrMatrix,
    factor: Factor,
}

impl std::fmt::Debug for LuSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuSolver")
            .field("n", &self.matrix.nrows)
            .field("nnz", &self.matrix.nnz())
            .field("cholesky", &self.is_cholesky())
            .finish()
    }
}

impl LuSolver {
    pub fn factor(matrix: &CsrMatrix) -> Result<Self> {
        if matrix.nrows != matrix.ncols {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", matrix.nrows, matrix.ncols),
            });
        }
        if matrix.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("system matrix"));
        }
        let triplets: Vec<_> = matrix.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(matrix.nrows, matrix.ncols, &triplets)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let symmetric = matrix.asymmetry() <= 1e-13;
        let llt = if symmetric {
            csc.sp_cholesky(faer::Side::Lower).ok()
        } else {
            None
        };
        let factor = match llt {
            Some(llt) => Factor::Llt(llt),
            None => Factor::Lu(csc.sp_lu().map_err(|e| {
                Error::Factorization(format!("{e:?} (n = {}, nnz = {})", matrix.nrows, matrix.nnz()))
            })?),
        };
        Ok(Self {
            matrix: matrix.clone(),
            factor,
        })
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self.factor, Factor::Llt(_))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        let sol = match &self.factor {
            Factor::Llt(f) => f.solve(&rhs),
            Factor::Lu(f) => f.solve(&rhs),
        };
        (0..b.len()).map(|i| sol[(i, 0)]).collect()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        CsrMatrix::check_len(self.matrix.nrows, b.len())?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("right-hand side"));
        }
        let mut x = self.raw_solve(b);
        // Iterative refinement, while it still pays off.
        let mut last = f64::INFINITY;
        for _ in 0..REFINEMENT_STEPS {
            let ax = self.matrix.spmv(&x)?;
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm < 0.5 * last) {
                break;
            }
            last = norm;
            let dx = self.raw_solve(&r);
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("solution contains non-finite values (singular matrix?)".into()));
        }
        let residual = relative_residual(&self.matrix, &x, b);
        if residual > SOLVE_TOLERANCE {
            return Err(Error::Residual {
                residual,
                tolerance: SOLVE_TOLERANCE,
            });
        }
        Ok(x)
    }
}

/// `||A x - b|| / ||b||`, or `||A x||` when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.spmv(x).expect("shape checked");
    let r: f64 = ax.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

/// Direct solve of a sparse system.
pub fn solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LuSolver::factor(a)?.solve(b)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
