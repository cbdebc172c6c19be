//! Uniform grids on `[-1, 1]²` and the matrix containers that live on them.
//!
//! All 2-D data is indexed `(i, j)` with `i` along x (`0..n_x`) and `j` along y
//! (`0..n_y`), and stored column-major so that [`vectorize`] is a plain copy:
//! column `j` occupies entries `j * n_x .. (j + 1) * n_x`.

use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

/// Uniform `n_x × n_y` grid on the square `[-1, 1] × [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n_x: usize,
    n_y: usize,
}

impl GridSpec {
    pub fn new(n_x: usize, n_y: usize) -> Result<Self> {
        if n_x < 2 {
            return Err(Error::InvalidSize(n_x));
        }
        if n_y < 2 {
            return Err(Error::InvalidSize(n_y));
        }
        Ok(Self { n_x, n_y })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    #[inline]
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    #[inline]
    pub fn n_y(&self) -> usize {
        self.n_y
    }

    /// Pixel count `m = n_x * n_y`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 / (self.n_x - 1) as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        2.0 / (self.n_y - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.dx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.dy()
    }

    /// Linear (vectorized) index of pixel `(i, j)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.n_x
    }

    /// Inverse of [`GridSpec::index`].
    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.n_x, k / self.n_x)
    }
}

/// Dense column-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major nested rows, mostly for tests and fixtures.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        for row in rows {
            check_len(c, row.len())?;
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i + j * self.rows] = value;
    }

    /// Column-major storage, i.e. the vectorization.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Stacks the columns of `m` into one vector.
pub fn vectorize(m: &Matrix) -> Vec<f64> {
    m.data.clone()
}

/// Reshapes a vectorized field back onto `grid`.
pub fn devectorize(v: &[f64], grid: &GridSpec) -> Result<Matrix> {
    check_len(grid.len(), v.len())?;
    Ok(Matrix {
        rows: grid.n_x,
        cols: grid.n_y,
        data: v.to_vec(),
    })
}

/// Grayscale intensities sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageField {
    grid: GridSpec,
    data: Matrix,
}

impl ImageField {
    pub fn new(grid: GridSpec, data: Matrix) -> Result<Self> {
        check_len(grid.n_x, data.rows)?;
        check_len(grid.n_y, data.cols)?;
        if !data.is_finite() {
            return Err(Error::NonFinite("image"));
        }
        Ok(Self { grid, data })
    }

    pub fn from_vec(grid: GridSpec, v: &[f64]) -> Result<Self> {
        Self::new(grid, devectorize(v, &grid)?)
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let data = Matrix::from_fn(grid.n_x, grid.n_y, |i, j| f(grid.x(i), grid.y(j)));
        Self { grid, data }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self::from_fn(grid, |_, _| value)
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn data(&self) -> &Matrix {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data.get(i, j)
    }

    pub fn vectorize(&self) -> Vec<f64> {
        vectorize(&self.data)
    }
}

/// Per-pixel velocity `(U, V)` in grid units per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    grid: GridSpec,
    u: Matrix,
    v: Matrix,
}

impl FlowField {
    pub fn new(grid: GridSpec, u: Matrix, v: Matrix) -> Result<Self> {
        for m in [&u, &v] {
            check_len(grid.n_x, m.rows)?;
            check_len(grid.n_y, m.cols)?;
            if !m.is_finite() {
                return Err(Error::NonFinite("flow"));
            }
        }
        Ok(Self { grid, u, v })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            u: Matrix::zeros(grid.n_x, grid.n_y),
            v: Matrix::zeros(grid.n_x, grid.n_y),
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let u = Matrix::from_fn(grid.n_x, grid.n_y, |i, j| f(grid.x(i), grid.y(j)).0);
        let v = Matrix::from_fn(grid.n_x, grid.n_y, |i, j| f(grid.x(i), grid.y(j)).1);
        Self { grid, u, v }
    }

    /// Splits a stacked unknown vector `x = [u; v]` of length `2m`.
    pub fn from_stacked(grid: GridSpec, x: &[f64]) -> Result<Self> {
        let m = grid.len();
        check_len(2 * m, x.len())?;
        Self::new(grid, devectorize(&x[..m], &grid)?, devectorize(&x[m..], &grid)?)
    }

    /// The stacked vector `[vec(U); vec(V)]`.
    pub fn to_stacked(&self) -> Vec<f64> {
        let mut x = vectorize(&self.u);
        x.extend_from_slice(self.v.as_slice());
        x
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn u(&self) -> &Matrix {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &Matrix {
        &self.v
    }
}
