use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Result};
use crate::grid_ops::Matrix;

/// Relative cutoff below which singular values are treated as zero.
pub const PINV_RCOND: f64 = 1e-12;

/// Minimum-norm least-squares solution `A⁺ b` through the SVD.
///
/// Meant for small systems (a few hundred unknowns at most); it is the dense
/// reference the sparse solvers are checked against.
pub fn least_squares_dense(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    check_len(a.rows(), b.len())?;
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(alloc::vec![0.0; a.cols()]);
    }
    let am = DMatrix::from_column_slice(a.rows(), a.cols(), a.as_slice());
    let svd = am.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = PINV_RCOND * s_max;

    let bv = DVector::from_column_slice(b);
    let mut coeffs = u.transpose() * bv;
    for (c, &s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        *c = if s > cutoff && s > 0.0 { *c / s } else { 0.0 };
    }
    let x = v_t.transpose() * coeffs;
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let a = Matrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.0 });
        let x = least_squares_dense(&a, &[1.0, -2.0, 3.0]).unwrap();
        for (p, q) in x.iter().zip([1.0, -2.0, 3.0]) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        let a = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        let x = least_squares_dense(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-14);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn overdetermined_residual_is_orthogonal_to_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Matrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let b: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = least_squares_dense(&a, &b).unwrap();
        let r: Vec<f64> = (0..6)
            .map(|i| b[i] - (0..3).map(|j| a.get(i, j) * x[j]).sum::<f64>())
            .collect();
        // normal equations: Aᵀ r = 0
        for j in 0..3 {
            let g: f64 = (0..6).map(|i| a.get(i, j) * r[i]).sum();
            assert!(g.abs() < 1e-10, "{g}");
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let a = Matrix::zeros(2, 2);
        assert!(least_squares_dense(&a, &[1.0]).is_err());
    }
}
