#![allow(dead_code)]

use bayesflow::bench::{BenchCase, FlowSpec, NoiseSpec};
use bayesflow::grid_ops::{assemble_system, FlowSystem, GridSpec, SparseOperator};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dense(op: &SparseOperator) -> DMatrix<f64> {
    let m = op.to_dense();
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j))
}

/// Synthetic image pair on an `n × n` grid with the given flow and noise level.
pub fn synthetic_system(n: usize, flow: u8, sigma: f64, seed: u64) -> FlowSystem {
    let grid = GridSpec::square(n).unwrap();
    let noise = if sigma > 0.0 {
        NoiseSpec::Gaussian { sigma }
    } else {
        NoiseSpec::None
    };
    let case = BenchCase::synthetic(&grid, FlowSpec::new(flow).unwrap(), noise, &mut rng(seed)).unwrap();
    assemble_system(&case.f, &case.g).unwrap()
}

/// Dense `λAᵀA + δL`.
pub fn dense_precision(sys: &FlowSystem, lambda: f64, delta: f64) -> DMatrix<f64> {
    let a = dense(sys.a());
    lambda * a.transpose() * &a + delta * dense(sys.l())
}

pub fn dense_solve(k: &DMatrix<f64>, rhs: &[f64]) -> DVector<f64> {
    k.clone()
        .cholesky()
        .expect("oracle matrix is positive definite")
        .solve(&DVector::from_column_slice(rhs))
}

pub fn rel_err(x: &[f64], y: &[f64]) -> f64 {
    let diff: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let norm: f64 = y.iter().map(|b| b * b).sum();
    (diff / norm).sqrt()
}
