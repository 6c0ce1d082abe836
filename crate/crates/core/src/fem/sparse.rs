use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Col, Par};

use crate::error::{FsiError, Result};

/// Compressed sparse column matrix with sorted, duplicate-free row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Triplet accumulator. Entries are summed in insertion order, so identical insertion
/// sequences give bit-identical operators.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets { nrows, ncols, ..Default::default() }
    }

    #[inline]
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols);
        self.rows.push(r);
        self.cols.push(c);
        self.vals.push(v);
    }

    pub fn to_op(&self) -> SparseOp {
        SparseOp::from_triplets(self.nrows, self.ncols, &self.rows, &self.cols, &self.vals)
    }

    /// Appends another accumulator shifted by (`r0`, `c0`).
    pub fn append_block(&mut self, other: &Triplets, r0: usize, c0: usize, scale: f64) {
        for k in 0..other.vals.len() {
            self.push(other.rows[k] + r0, other.cols[k] + c0, scale * other.vals[k]);
        }
    }

    pub fn append_op(&mut self, op: &SparseOp, r0: usize, c0: usize, scale: f64) {
        for j in 0..op.ncols {
            for k in op.col_ptr[j]..op.col_ptr[j + 1] {
                self.push(op.row_idx[k] + r0, j + c0, scale * op.values[k]);
            }
        }
    }
}

impl SparseOp {
    pub fn from_triplets(nrows: usize, ncols: usize, rows: &[usize], cols: &[usize], vals: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by_key(|&k| (cols[k], rows[k]));
        let mut col_ptr = vec![0; ncols + 1];
        let mut row_idx = Vec::with_capacity(vals.len());
        let mut values: Vec<f64> = Vec::with_capacity(vals.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let key = (cols[k], rows[k]);
            if last == Some(key) {
                *values.last_mut().unwrap() += vals[k];
            } else {
                row_idx.push(rows[k]);
                values.push(vals[k]);
                col_ptr[cols[k] + 1] += 1;
                last = Some(key);
            }
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        SparseOp { nrows, ncols, col_ptr, row_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        SparseOp {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
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

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let s = &self.row_idx[self.col_ptr[c]..self.col_ptr[c + 1]];
        match s.binary_search(&r) {
            Ok(k) => self.values[self.col_ptr[c] + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "operand length");
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[k]] += self.values[k] * xj;
            }
        }
        y
    }

    /// `y = A^T x`.
    pub fn mul_t_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "operand length");
        (0..self.ncols)
            .map(|j| (self.col_ptr[j]..self.col_ptr[j + 1]).map(|k| self.values[k] * x[self.row_idx[k]]).sum())
            .collect()
    }

    /// Bilinear form `a^T A b`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        super::field::dot(a, &self.mul_vec(b))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                m[(self.row_idx[k], j)] += self.values[k];
            }
        }
        m
    }

    pub fn transpose(&self) -> SparseOp {
        let mut rows = Vec::with_capacity(self.nnz());
        let mut cols = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                rows.push(j);
                cols.push(self.row_idx[k]);
            }
        }
        SparseOp::from_triplets(self.ncols, self.nrows, &rows, &cols, &self.values)
    }

    /// Entrywise maximum absolute difference; operands must have equal dimensions.
    pub fn max_abs_diff(&self, other: &SparseOp) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut m: f64 = 0.0;
        for j in 0..self.ncols {
            let mut rows: Vec<usize> = self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]].to_vec();
            rows.extend_from_slice(&other.row_idx[other.col_ptr[j]..other.col_ptr[j + 1]]);
            rows.sort_unstable();
            rows.dedup();
            for r in rows {
                m = m.max((self.get(r, j) - other.get(r, j)).abs());
            }
        }
        m
    }

    /// `A * B` for a dense column-major `B` given as columns.
    pub fn mul_dense_cols(&self, b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        b.iter().map(|c| self.mul_vec(c)).collect()
    }

    /// Sum of the entries of each row.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                s[self.row_idx[k]] += self.values[k];
            }
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn faer_ref(&self) -> Result<SparseColMatRef<'_, usize, f64>> {
        let sym = SymbolicSparseColMatRef::new_checked(self.nrows, self.ncols, &self.col_ptr, None, &self.row_idx);
        Ok(SparseColMatRef::new(sym, &self.values))
    }

    fn same_pattern(&self, other: &SparseOp) -> bool {
        self.nrows == other.nrows && self.col_ptr == other.col_ptr && self.row_idx == other.row_idx
    }
}

/// Sparse LU factorization.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SparseLu({}x{})", self.n, self.n)
    }
}

/// Caches the symbolic analysis for operators sharing one sparsity pattern.
#[derive(Default)]
pub struct LuCache {
    pattern: Option<(SparseOp, SymbolicLu<usize>)>,
}

impl std::fmt::Debug for LuCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LuCache(cached: {})", self.pattern.is_some())
    }
}

fn sequential() {
    faer::set_global_parallelism(Par::Seq);
}

fn square(op: &SparseOp) -> Result<()> {
    if op.nrows != op.ncols {
        return Err(FsiError::Dimension(format!("LU of a {}x{} operator", op.nrows, op.ncols)));
    }
    if !op.is_finite() {
        return Err(FsiError::NonFinite);
    }
    Ok(())
}

fn lu_error(e: faer::sparse::linalg::LuError) -> FsiError {
    match e {
        faer::sparse::linalg::LuError::SymbolicSingular { index } => FsiError::Singular { index },
        faer::sparse::linalg::LuError::Generic(_) => FsiError::Singular { index: 0 },
    }
}

impl SparseLu {
    pub fn factor(op: &SparseOp) -> Result<Self> {
        let mut cache = LuCache::default();
        cache.factor(op)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(FsiError::Dimension(format!("rhs of length {} for a {}-system", rhs.len(), self.n)));
        }
        let b = Col::<f64>::from_fn(self.n, |i| rhs[i]);
        let x = self.lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if let Some(index) = out.iter().position(|v| !v.is_finite()) {
            return Err(FsiError::Singular { index });
        }
        Ok(out)
    }
}

impl LuCache {
    pub fn factor(&mut self, op: &SparseOp) -> Result<SparseLu> {
        sequential();
        square(op)?;
        let reuse = matches!(&self.pattern, Some((p, _)) if p.same_pattern(op));
        if !reuse {
            let sym = SymbolicLu::try_new(op.faer_ref()?.symbolic())
                .map_err(|e| FsiError::Invalid(format!("symbolic LU failed: {e:?}")))?;
            let mut pat = op.clone();
            pat.values.clear();
            self.pattern = Some((pat, sym));
        }
        let sym = self.pattern.as_ref().unwrap().1.clone();
        let lu = Lu::try_new_with_symbolic(sym, op.faer_ref()?).map_err(lu_error)?;
        Ok(SparseLu { lu, n: op.nrows })
    }
}

/// One-shot sparse solve with a residual check.
pub fn solve_linear(op: &SparseOp, rhs: &[f64]) -> Result<Vec<f64>> {
    let lu = SparseLu::factor(op)?;
    let x = lu.solve(rhs)?;
    let r = op.mul_vec(&x);
    let res = r.iter().zip(rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = 1.0 + super::field::max_abs(rhs);
    if res > 1e-10 * scale {
        log::warn!("linear solve residual {res:e} (rhs scale {scale:e})");
        if res > 1e-6 * scale {
            return Err(FsiError::Singular { index: worst_row(&r, rhs) });
        }
    }
    Ok(x)
}

fn worst_row(r: &[f64], b: &[f64]) -> usize {
    let mut best = (0, -1.0);
    for (i, (x, y)) in r.iter().zip(b).enumerate() {
        let d = (x - y).abs();
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}
