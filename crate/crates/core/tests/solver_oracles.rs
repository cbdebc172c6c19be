mod common;

use bayesflow::grid_ops::FlowSystem;
use bayesflow::solver::{
    cg_solve, conditional_mean, posterior_precision_apply, precision_perturbation, sample_conditional_x,
    tikhonov_solve, CgConfig, TikhonovConfig,
};
use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let m = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
    m.transpose() * &m + DMatrix::identity(n, n)
}

fn dense_apply(k: &DMatrix<f64>) -> impl FnMut(&[f64], &mut [f64]) + '_ {
    move |v, out| {
        let y = k * DVector::from_column_slice(v);
        out.copy_from_slice(y.as_slice());
    }
}

#[test]
fn cg_matches_cholesky_on_random_spd() {
    for seed in 0..5 {
        let k = random_spd(10, seed);
        let rhs: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).cos()).collect();
        let out = cg_solve(dense_apply(&k), &rhs, &CgConfig::default()).unwrap();
        assert!(out.converged());
        let oracle = dense_solve(&k, &rhs);
        let err = rel_err(&out.x, oracle.as_slice());
        assert!(err < 1e-6, "seed {seed}: {err:e}");
    }
}

#[test]
fn cg_within_ten_tol_up_to_two_hundred_unknowns() {
    for (n, seed) in [(20, 1), (80, 2), (200, 3)] {
        let k = random_spd(n, seed);
        let rhs: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let cfg = CgConfig::default();
        let out = cg_solve(dense_apply(&k), &rhs, &cfg).unwrap();
        assert!(out.converged());
        let err = rel_err(&out.x, dense_solve(&k, &rhs).as_slice());
        assert!(err < 10.0 * cfg.tol, "n={n}: {err:e}");
    }
}

#[test]
fn cg_energy_error_never_increases() {
    // CG minimizes ‖x − x*‖_K over growing Krylov spaces; the plain residual
    // norm carries no such guarantee.
    for (n, seed) in [(10, 11), (40, 12), (120, 13)] {
        let k = random_spd(n, seed);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.1).collect();
        let exact = dense_solve(&k, &rhs);
        let energy = |x: &[f64]| {
            let e = DVector::from_column_slice(x) - &exact;
            e.dot(&(&k * &e))
        };
        let mut previous = energy(&vec![0.0; n]);
        for cap in 1..=40.min(n) {
            let cfg = CgConfig {
                tol: 1e-14,
                max_iter: cap,
                ..CgConfig::default()
            };
            let out = cg_solve(dense_apply(&k), &rhs, &cfg).unwrap();
            let current = energy(&out.x);
            assert!(
                current <= previous * (1.0 + 1e-10),
                "n={n} iteration {cap}: {previous:e} -> {current:e}"
            );
            previous = current;
        }
    }
}

#[test]
fn tikhonov_matches_dense_normal_equations() {
    let sys = synthetic_system(4, 1, 0.0, 3);
    let alpha = 0.1;
    let out = tikhonov_solve(&sys, &TikhonovConfig::new(alpha).unwrap(), &CgConfig::default()).unwrap();
    assert!(out.converged());
    let k = dense_precision(&sys, 1.0, alpha);
    let err = rel_err(&out.x, dense_solve(&k, &sys.at_b()).as_slice());
    assert!(err < 1e-6, "{err:e}");
}

#[test]
fn precision_apply_matches_dense() {
    let sys = synthetic_system(4, 3, 0.02, 5);
    let mut r = rng(6);
    for (lambda, delta) in [(1.0, 1.0), (250.0, 0.3), (1e-3, 40.0)] {
        let v: Vec<f64> = (0..sys.n()).map(|_| r.sample(StandardNormal)).collect();
        let got = posterior_precision_apply(&sys, lambda, delta, &v).unwrap();
        let want = dense_precision(&sys, lambda, delta) * DVector::from_column_slice(&v);
        let scale = want.amax();
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-12 * scale, "{g} vs {w}");
        }
    }
}

#[test]
fn tikhonov_and_conditional_mean_agree_within_cg_accuracy() {
    // Both solve the same system up to the factor λ. Each CG answer is within
    // cond·tol of the exact solution, so the gap is bounded by twice that.
    let sys = synthetic_system(10, 2, 0.02, 8);
    let mut r = rng(9);
    let cg = CgConfig::default();
    for _ in 0..10 {
        let lambda = 10f64.powf(r.random_range(-1.0..3.0));
        let delta = 10f64.powf(r.random_range(-2.0..1.0));
        let tik = tikhonov_solve(&sys, &TikhonovConfig::new(delta / lambda).unwrap(), &cg).unwrap();
        let mean = conditional_mean(&sys, lambda, delta, &cg).unwrap();
        assert!(tik.converged() && mean.converged());
        let eig = dense_precision(&sys, 1.0, delta / lambda).symmetric_eigen().eigenvalues;
        let cond = eig.max() / eig.min();
        let err = rel_err(&tik.x, &mean.x);
        assert!(
            err <= 2.0 * cond * cg.tol,
            "λ={lambda}, δ={delta}: {err:e} (cond {cond:e})"
        );
    }
}

fn empirical_covariance(draws: &[Vec<f64>]) -> DMatrix<f64> {
    let n = draws[0].len();
    let count = draws.len() as f64;
    let mean = draws
        .iter()
        .fold(DVector::zeros(n), |acc, d| acc + DVector::from_column_slice(d))
        / count;
    let mut cov = DMatrix::zeros(n, n);
    for d in draws {
        let c = DVector::from_column_slice(d) - &mean;
        cov += &c * c.transpose();
    }
    cov / (count - 1.0)
}

fn assert_diagonals_close(emp: &DMatrix<f64>, want: &DMatrix<f64>, tol: f64) {
    for i in 0..want.nrows() {
        let rel = (emp[(i, i)] - want[(i, i)]).abs() / want[(i, i)];
        assert!(
            rel < tol,
            "diagonal {i}: {} vs {} ({rel:.4})",
            emp[(i, i)],
            want[(i, i)]
        );
    }
}

#[test]
fn perturbation_covariance_is_the_precision() {
    let sys = synthetic_system(3, 4, 0.0, 10);
    let (lambda, delta) = (3.0, 0.5);
    let mut r = rng(11);
    let draws: Vec<Vec<f64>> = (0..100_000)
        .map(|_| precision_perturbation(&sys, lambda, delta, &mut r))
        .collect();
    assert_diagonals_close(
        &empirical_covariance(&draws),
        &dense_precision(&sys, lambda, delta),
        0.05,
    );
}

#[test]
fn conditional_draws_have_inverse_precision_covariance() {
    let sys = synthetic_system(3, 1, 0.02, 12);
    let (lambda, delta) = (2.0, 0.7);
    let k = dense_precision(&sys, lambda, delta);
    let cov = k.clone().try_inverse().unwrap();
    let mut r = rng(13);
    let cg = CgConfig::default();
    let draws: Vec<Vec<f64>> = (0..100_000)
        .map(|_| {
            let out = sample_conditional_x(&sys, lambda, delta, &cg, &mut r).unwrap();
            assert!(out.converged());
            out.x
        })
        .collect();
    assert_diagonals_close(&empirical_covariance(&draws), &cov, 0.05);

    let mut rhs = sys.at_b();
    rhs.iter_mut().for_each(|v| *v *= lambda);
    let mean_oracle = dense_solve(&k, &rhs);
    let count = draws.len() as f64;
    for i in 0..sys.n() {
        let mean = draws.iter().map(|d| d[i]).sum::<f64>() / count;
        let se = (cov[(i, i)] / count).sqrt();
        assert!((mean - mean_oracle[i]).abs() < 4.0 * se, "component {i}");
    }
}

#[test]
fn constant_image_conditional_has_zero_mean() {
    let grid = bayesflow::grid_ops::GridSpec::square(4).unwrap();
    let f = bayesflow::grid_ops::ImageField::constant(grid, 0.3);
    let sys: FlowSystem = bayesflow::grid_ops::assemble_system(&f, &f).unwrap();
    let (lambda, delta) = (1.0, 1.0);
    let mut r = rng(14);
    let cg = CgConfig::default();
    let draws: Vec<Vec<f64>> = (0..10_000)
        .map(|_| sample_conditional_x(&sys, lambda, delta, &cg, &mut r).unwrap().x)
        .collect();
    let count = draws.len() as f64;
    for i in 0..sys.n() {
        let mean = draws.iter().map(|d| d[i]).sum::<f64>() / count;
        let var = draws.iter().map(|d| (d[i] - mean).powi(2)).sum::<f64>() / (count - 1.0);
        let se = (var / count).sqrt();
        assert!(mean.abs() < 4.0 * se, "component {i}: {mean} (se {se})");
    }
}
