//! Compressed-sparse-row operator with the handful of algebraic operations the
//! flow operators need: Kronecker products, transposes, products and sums.
//!
//! Every routine walks rows and columns in ascending order, so results are
//! bitwise reproducible.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::grid_ops::grid::Matrix;

/// Row-compressed sparse matrix. Column indices inside each row are strictly
/// increasing and duplicate-free. Explicit zeros are kept as structural entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &t {
            if r >= rows {
                return Err(Error::Dimension {
                    expected: rows,
                    actual: r + 1,
                });
            }
            if c >= cols {
                return Err(Error::Dimension {
                    expected: cols,
                    actual: c + 1,
                });
            }
        }
        // stable: duplicates are summed in insertion order
        t.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of structural entries.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `r`, in ascending column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Value at `(r, c)`, zero if not structurally present.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// Checks the structural invariants.
    pub fn is_well_formed(&self) -> bool {
        self.row_ptr.len() == self.rows + 1
            && self.row_ptr[self.rows] == self.values.len()
            && self.col_idx.len() == self.values.len()
            && (0..self.rows).all(|r| {
                let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
                cols.iter().all(|&c| c < self.cols) && cols.windows(2).all(|w| w[0] < w[1])
            })
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = M x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.cols, x.len())?;
        check_len(self.rows, y.len())?;
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
        Ok(())
    }

    /// `y += Mᵀ x`, scattering row by row.
    pub fn matvec_transpose_add(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.rows, x.len())?;
        check_len(self.cols, y.len())?;
        for (r, &xr) in x.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
        Ok(())
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.cols];
        self.matvec_transpose_add(x, &mut y)?;
        Ok(y)
    }

    /// `xᵀ M x` for square `M`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        check_len(self.rows, self.cols)?;
        let mx = self.matvec(x)?;
        Ok(x.iter().zip(&mx).map(|(a, b)| a * b).sum())
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let dst = next[c];
                col_idx[dst] = r;
                values[dst] = self.values[k];
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Sparse product `self · rhs` (row-by-row accumulation).
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        check_len(self.cols, rhs.rows)?;
        let mut acc = vec![0.0; rhs.cols];
        let mut mark = vec![usize::MAX; rhs.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..self.rows {
            touched.clear();
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                col_idx.push(c);
                values.push(acc[c]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: rhs.cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Entrywise sum of two operators of equal shape.
    pub fn add(&self, rhs: &Self) -> Result<Self> {
        check_len(self.rows, rhs.rows)?;
        check_len(self.cols, rhs.cols)?;
        let triplets = (0..self.rows).flat_map(|r| {
            self.row(r)
                .map(move |(c, v)| (r, c, v))
                .chain(rhs.row(r).map(move |(c, v)| (r, c, v)))
        });
        Self::from_triplets(self.rows, self.cols, triplets)
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let rows = self.rows * rhs.rows;
        let cols = self.cols * rhs.cols;
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() * rhs.nnz());
        let mut values = Vec::with_capacity(self.nnz() * rhs.nnz());
        row_ptr.push(0);
        for ra in 0..self.rows {
            for rb in 0..rhs.rows {
                for (ca, va) in self.row(ra) {
                    for (cb, vb) in rhs.row(rb) {
                        col_idx.push(ca * rhs.cols + cb);
                        values.push(va * vb);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Horizontal concatenation `[self, rhs]`.
    pub fn hstack(&self, rhs: &Self) -> Result<Self> {
        check_len(self.rows, rhs.rows)?;
        let off = self.cols;
        let triplets = (0..self.rows).flat_map(|r| {
            self.row(r)
                .map(move |(c, v)| (r, c, v))
                .chain(rhs.row(r).map(move |(c, v)| (r, c + off, v)))
        });
        Self::from_triplets(self.rows, self.cols + rhs.cols, triplets)
    }

    /// Vertical concatenation `[self; rhs]`.
    pub fn vstack(&self, rhs: &Self) -> Result<Self> {
        check_len(self.cols, rhs.cols)?;
        let off = self.rows;
        let triplets = (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .chain((0..rhs.rows).flat_map(|r| rhs.row(r).map(move |(c, v)| (r + off, c, v))));
        Self::from_triplets(self.rows + rhs.rows, self.cols, triplets)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m.set(r, c, v);
            }
        }
        m
    }

    /// Largest `|M - Mᵀ|` entry.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        if t.rows != self.rows || t.cols != self.cols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - t.get(r, c)).abs());
            }
            for (c, v) in t.row(r) {
                worst = worst.max((v - self.get(r, c)).abs());
            }
        }
        worst
    }
}

/// Two square operators stored on the union of their sparsity patterns, so
/// `(w₁ M₁ + w₂ M₂) x` costs a single pass for any weights.
///
/// Rows are padded to a common width with zero entries, which keeps the inner
/// loop trip count constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePair {
    n: usize,
    width: usize,
    col_idx: Vec<usize>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl SparsePair {
    pub fn new(first: &SparseOperator, second: &SparseOperator) -> Result<Self> {
        check_len(first.rows, first.cols)?;
        check_len(first.rows, second.rows)?;
        check_len(first.cols, second.cols)?;
        let n = first.rows;
        let mut rows = Vec::with_capacity(n);
        for r in 0..n {
            let mut a = first.row(r).peekable();
            let mut b = second.row(r).peekable();
            let mut entries = Vec::new();
            loop {
                let entry = match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ca, va)), Some((cb, vb))) if ca == cb => {
                        a.next();
                        b.next();
                        (ca, va, vb)
                    }
                    (Some((ca, va)), Some((cb, _))) if ca < cb => {
                        a.next();
                        (ca, va, 0.0)
                    }
                    (Some((ca, va)), None) => {
                        a.next();
                        (ca, va, 0.0)
                    }
                    (_, Some((cb, vb))) => {
                        b.next();
                        (cb, 0.0, vb)
                    }
                };
                entries.push(entry);
            }
            rows.push(entries);
        }
        let width = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let mut col_idx = Vec::with_capacity(n * width);
        let mut v1 = Vec::with_capacity(n * width);
        let mut v2 = Vec::with_capacity(n * width);
        for (r, entries) in rows.iter().enumerate() {
            for k in 0..width {
                let (c, x, y) = entries.get(k).copied().unwrap_or((r, 0.0, 0.0));
                col_idx.push(c);
                v1.push(x);
                v2.push(y);
            }
        }
        Ok(Self {
            n,
            width,
            col_idx,
            first: v1,
            second: v2,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `y = (w1 M₁ + w2 M₂) x`.
    pub fn apply_weighted(&self, w1: f64, w2: f64, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.n, x.len())?;
        check_len(self.n, y.len())?;
        let w = self.width;
        let rows = self
            .col_idx
            .chunks_exact(w)
            .zip(self.first.chunks_exact(w))
            .zip(self.second.chunks_exact(w));
        for (yr, ((cols, a), b)) in y.iter_mut().zip(rows) {
            let (acc1, acc2) = cols
                .iter()
                .zip(a.iter().zip(b))
                .fold((0.0, 0.0), |(s1, s2), (&c, (p, q))| {
                    let xc = x[c];
                    (s1 + p * xc, s2 + q * xc)
                });
            *yr = w1 * acc1 + w2 * acc2;
        }
        Ok(())
    }
}
