//! Finite-difference operators on a grid and the linear flow system `A x ≈ b`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::grid_ops::grid::{GridSpec, ImageField};
use crate::grid_ops::sparse::{SparseOperator, SparsePair};

/// `k × k` forward-difference matrix.
///
/// Rows `0..k-1` hold `-1` on the diagonal and `+1` just right of it. The last
/// row repeats the backward difference (`-1` at `k-2`, `+1` at `k-1`) so every
/// row sums to zero and constants are annihilated.
pub fn build_diff_matrix(k: usize) -> Result<SparseOperator> {
    if k < 2 {
        return Err(Error::InvalidSize(k));
    }
    let interior = (0..k - 1).flat_map(|i| [(i, i, -1.0), (i, i + 1, 1.0)]);
    let last = [(k - 1, k - 2, -1.0), (k - 1, k - 1, 1.0)];
    SparseOperator::from_triplets(k, k, interior.chain(last))
}

/// Spatial difference operators `(Q_x, Q_y)` acting on vectorized images.
///
/// `Q_x = (I_{n_y} ⊗ S_{n_x}) / dx` differences along x (within a column);
/// `Q_y = (S_{n_y} ⊗ I_{n_x}) / dy` differences along y (across columns).
pub fn build_qx_qy(grid: &GridSpec) -> (SparseOperator, SparseOperator) {
    let sx = build_diff_matrix(grid.n_x()).expect("grid guarantees n_x >= 2");
    let sy = build_diff_matrix(grid.n_y()).expect("grid guarantees n_y >= 2");
    let qx = SparseOperator::identity(grid.n_y()).kron(&sx).scale(1.0 / grid.dx());
    let qy = sy.kron(&SparseOperator::identity(grid.n_x())).scale(1.0 / grid.dy());
    (qx, qy)
}

/// Smoothness penalty `L = I_2 ⊗ (Q_xᵀQ_x + Q_yᵀQ_y)` on stacked flows `[u; v]`.
pub fn build_regularizer(grid: &GridSpec) -> SparseOperator {
    let (qx, qy) = build_qx_qy(grid);
    regularizer_from(&qx, &qy)
}

fn regularizer_from(qx: &SparseOperator, qy: &SparseOperator) -> SparseOperator {
    let block = qx
        .transpose()
        .matmul(qx)
        .and_then(|xx| qy.transpose().matmul(qy).and_then(|yy| xx.add(&yy)))
        .expect("Q_x and Q_y share the grid dimension");
    SparseOperator::identity(2).kron(&block)
}

/// Linearized brightness-constancy system for one image pair.
///
/// `A = [diag(f_x), diag(f_y)]` is `m × 2m`, `b = f − g`, and `L` is the
/// `2m × 2m` smoothness penalty. The difference operators are kept so the
/// Gaussian sampler can draw from `N(0, L)` through `L = CᵀC`.
#[derive(Debug, Clone)]
pub struct FlowSystem {
    grid: GridSpec,
    a: SparseOperator,
    b: Vec<f64>,
    l: SparseOperator,
    qx: SparseOperator,
    qy: SparseOperator,
    normal: SparsePair,
}

fn normal_pair(a: &SparseOperator, l: &SparseOperator) -> Result<SparsePair> {
    SparsePair::new(&a.transpose().matmul(a)?, l)
}

/// Builds the flow system from a first image `f` and second image `g`.
///
/// Spatial gradients come from the first image only.
pub fn assemble_system(f: &ImageField, g: &ImageField) -> Result<FlowSystem> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *f.grid();
    let (qx, qy) = build_qx_qy(&grid);
    let fv = f.vectorize();
    let fx = qx.matvec(&fv)?;
    let fy = qy.matvec(&fv)?;
    let a = SparseOperator::diag(&fx).hstack(&SparseOperator::diag(&fy))?;
    let b: Vec<f64> = fv.iter().zip(g.vectorize()).map(|(f, g)| f - g).collect();
    let l = regularizer_from(&qx, &qy);
    let normal = normal_pair(&a, &l)?;
    Ok(FlowSystem {
        grid,
        a,
        b,
        l,
        qx,
        qy,
        normal,
    })
}

impl FlowSystem {
    /// Builds a system from explicit parts. `a` must be `m × 2m`, `l` must be
    /// `2m × 2m`; the difference operators are taken from `grid`.
    pub fn from_parts(grid: GridSpec, a: SparseOperator, b: Vec<f64>, l: SparseOperator) -> Result<Self> {
        let m = grid.len();
        check_len(m, a.rows())?;
        check_len(2 * m, a.cols())?;
        check_len(m, b.len())?;
        check_len(2 * m, l.rows())?;
        check_len(2 * m, l.cols())?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("b"));
        }
        let (qx, qy) = build_qx_qy(&grid);
        let normal = normal_pair(&a, &l)?;
        Ok(Self {
            grid,
            a,
            b,
            l,
            qx,
            qy,
            normal,
        })
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Pixel count.
    #[inline]
    pub fn m(&self) -> usize {
        self.grid.len()
    }

    /// Unknown count, `2m`.
    #[inline]
    pub fn n(&self) -> usize {
        2 * self.grid.len()
    }

    #[inline]
    pub fn a(&self) -> &SparseOperator {
        &self.a
    }

    #[inline]
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    #[inline]
    pub fn l(&self) -> &SparseOperator {
        &self.l
    }

    #[inline]
    pub fn qx(&self) -> &SparseOperator {
        &self.qx
    }

    #[inline]
    pub fn qy(&self) -> &SparseOperator {
        &self.qy
    }

    /// `AᵀA` and `L` on a shared pattern, for applying `w₁AᵀA + w₂L`.
    #[inline]
    pub fn normal(&self) -> &SparsePair {
        &self.normal
    }

    /// `Aᵀ b`.
    pub fn at_b(&self) -> Vec<f64> {
        self.a.matvec_transpose(&self.b).expect("A and b are consistent")
    }

    /// `‖A x − b‖²`.
    pub fn residual_norm_sq(&self, x: &[f64]) -> Result<f64> {
        let ax = self.a.matvec(x)?;
        Ok(ax.iter().zip(&self.b).map(|(p, q)| (p - q) * (p - q)).sum())
    }

    /// `xᵀ L x`.
    pub fn regularity(&self, x: &[f64]) -> Result<f64> {
        self.l.quadratic_form(x)
    }

    /// `y += Cᵀ e` with `C = I_2 ⊗ [Q_x; Q_y]`, `e` of length `4m`.
    ///
    /// `CᵀC = L`, so for standard normal `e` this is a draw from `N(0, L)`.
    pub fn apply_ct_add(&self, e: &[f64], y: &mut [f64]) -> Result<()> {
        let m = self.m();
        check_len(4 * m, e.len())?;
        check_len(2 * m, y.len())?;
        let (yu, yv) = y.split_at_mut(m);
        self.qx.matvec_transpose_add(&e[..m], yu)?;
        self.qy.matvec_transpose_add(&e[m..2 * m], yu)?;
        self.qx.matvec_transpose_add(&e[2 * m..3 * m], yv)?;
        self.qy.matvec_transpose_add(&e[3 * m..], yv)?;
        Ok(())
    }

    /// `‖Q_x u‖² + ‖Q_y u‖² + ‖Q_x v‖² + ‖Q_y v‖²`, the expanded form of `xᵀLx`.
    pub fn gradient_energy(&self, x: &[f64]) -> Result<f64> {
        let m = self.m();
        check_len(2 * m, x.len())?;
        let mut total = 0.0;
        for part in [&x[..m], &x[m..]] {
            for q in [&self.qx, &self.qy] {
                total += q.matvec(part)?.iter().map(|v| v * v).sum::<f64>();
            }
        }
        Ok(total)
    }
}

/// Spatial gradients `(Q_x f, Q_y f)` of an image.
pub fn image_gradients(f: &ImageField) -> (Vec<f64>, Vec<f64>) {
    let (qx, qy) = build_qx_qy(f.grid());
    let fv = f.vectorize();
    let fx = qx.matvec(&fv).expect("operator matches grid");
    let fy = qy.matvec(&fv).expect("operator matches grid");
    (fx, fy)
}

/// Zero vector of the unknown dimension.
pub fn zero_unknowns(sys: &FlowSystem) -> Vec<f64> {
    vec![0.0; sys.n()]
}
