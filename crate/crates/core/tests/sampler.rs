mod common;

use bayesflow::grid_ops::{assemble_system, GridSpec, ImageField};
use bayesflow::sampler::{
    effective_alpha_trace, gibbs_step, run_chain, sample_gamma, ChainConfig, ChainState, HyperPriors,
};
use bayesflow::solver::CgConfig;
use common::*;
use nalgebra::DVector;

#[test]
fn gamma_moments_at_five_parameter_pairs() {
    let mut r = rng(21);
    let n = 100_000;
    for (shape, rate) in [(1.0, 2.0), (450.0, 3.0), (0.4, 1.5), (2.5, 0.1), (901.0, 7.5)] {
        let draws: Vec<f64> = (0..n).map(|_| sample_gamma(shape, rate, &mut r).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let true_mean = shape / rate;
        let true_var = shape / (rate * rate);
        let se_mean = (true_var / n as f64).sqrt();
        // Var of the sample variance is σ⁴ (2 + 6/k) / n for Gamma(k, ·).
        let se_var = true_var * ((2.0 + 6.0 / shape) / n as f64).sqrt();
        assert!(
            (mean - true_mean).abs() < 3.0 * se_mean,
            "({shape}, {rate}) mean {mean}"
        );
        assert!((var - true_var).abs() < 3.0 * se_var, "({shape}, {rate}) var {var}");
    }
}

#[test]
fn gamma_rates_match_dense_residual_and_shapes_are_exact() {
    let sys = synthetic_system(3, 3, 0.02, 22);
    let priors = HyperPriors::default();
    let a = dense(sys.a());
    let l = dense(sys.l());
    let b = DVector::from_column_slice(sys.b());
    let mut state = ChainState::initial(&sys, 1.0, 1.0);
    let mut r = rng(23);
    for _ in 0..20 {
        let (next, info) = gibbs_step(&state, &sys, &priors, &CgConfig::default(), &mut r).unwrap();
        let x = DVector::from_column_slice(&next.x);
        let res = &a * &x - &b;
        let lambda_rate = 0.5 * res.dot(&res) + priors.beta_lambda;
        let delta_rate = 0.5 * x.dot(&(&l * &x)) + priors.beta_delta;
        assert!((info.lambda_rate - lambda_rate).abs() <= 1e-12 * lambda_rate);
        assert!((info.delta_rate - delta_rate).abs() <= 1e-12 * delta_rate);
        assert_eq!(info.lambda_shape, 9.0 / 2.0 + priors.alpha_lambda);
        assert_eq!(info.delta_shape, 18.0 / 2.0 + priors.alpha_delta);
        assert!(next.lambda > 0.0 && next.delta > 0.0);
        assert_eq!(next.k, state.k + 1);
        state = next;
    }
}

#[test]
fn constant_image_lambda_chain_is_iid_gamma() {
    let grid = GridSpec::square(5).unwrap();
    let f = ImageField::constant(grid, 0.5);
    let sys = assemble_system(&f, &f).unwrap();
    let priors = HyperPriors::default();
    let cfg = ChainConfig {
        iterations: 4000,
        burn_in: 0,
        seed: 24,
        max_restarts: 0,
        ..ChainConfig::default()
    };
    let result = run_chain(&sys, &priors, &cfg, &CgConfig::default()).unwrap();
    let shape = sys.m() as f64 / 2.0 + priors.alpha_lambda;
    let rate = priors.beta_lambda;
    let n = result.lambda_trace.len() as f64;
    let mean = result.lambda_trace.iter().sum::<f64>() / n;
    let se = shape.sqrt() / rate / n.sqrt();
    assert!((mean - shape / rate).abs() < 3.0 * se, "{mean} vs {}", shape / rate);
    assert!(result.delta_trace.iter().all(|d| *d > 0.0 && d.is_finite()));
}

#[test]
fn constant_flow_gives_prior_delta_conditional() {
    // With x^k constant, xᵀLx = 0 and the δ rate is β_δ alone.
    let grid = GridSpec::square(4).unwrap();
    let f = ImageField::constant(grid, 0.5);
    let sys = assemble_system(&f, &f).unwrap();
    let priors = HyperPriors::default();
    let cg = CgConfig::default();
    let mut r = rng(25);
    // δ → ∞ pins the draw of x^k to the null space of L.
    let state = ChainState::initial(&sys, 1.0, 1e30);
    let (_, info) = gibbs_step(&state, &sys, &priors, &cg, &mut r).unwrap();
    assert_eq!(info.delta_shape, sys.n() as f64 / 2.0 + 1.0);
    assert!((info.delta_rate - priors.beta_delta).abs() < 1e-6 * priors.beta_delta);
}

#[test]
fn posterior_mean_matches_fixed_point_mean() {
    let sys = synthetic_system(3, 1, 0.05, 26);
    let cfg = ChainConfig {
        iterations: 20_000,
        burn_in: 1000,
        seed: 27,
        max_restarts: 0,
        ..ChainConfig::default()
    };
    let result = run_chain(&sys, &HyperPriors::default(), &cfg, &CgConfig::default()).unwrap();
    let post = |t: &[f64]| t[cfg.burn_in..].iter().sum::<f64>() / (t.len() - cfg.burn_in) as f64;
    let lambda = post(&result.lambda_trace);
    let delta = post(&result.delta_trace);
    let mut rhs = sys.at_b();
    rhs.iter_mut().for_each(|v| *v *= lambda);
    let oracle = dense_solve(&dense_precision(&sys, lambda, delta), &rhs);
    let err = rel_err(result.stats.mean(), oracle.as_slice());
    assert!(err < 0.05, "{err}");
}

#[test]
fn fixed_seed_is_bitwise_reproducible() {
    let sys = synthetic_system(6, 4, 0.02, 28);
    let cfg = ChainConfig {
        iterations: 60,
        burn_in: 10,
        seed: 29,
        keep_samples: true,
        ..ChainConfig::default()
    };
    let a = run_chain(&sys, &HyperPriors::default(), &cfg, &CgConfig::default()).unwrap();
    let b = run_chain(&sys, &HyperPriors::default(), &cfg, &CgConfig::default()).unwrap();
    assert_eq!(a, b);
    let c = run_chain(
        &sys,
        &HyperPriors::default(),
        &ChainConfig { seed: 30, ..cfg },
        &CgConfig::default(),
    )
    .unwrap();
    assert_ne!(a.lambda_trace, c.lambda_trace);
}

#[test]
fn one_step_past_burn_in_keeps_one_sample() {
    let sys = synthetic_system(4, 2, 0.02, 31);
    let cfg = ChainConfig {
        iterations: 11,
        burn_in: 10,
        seed: 32,
        max_restarts: 0,
        keep_samples: true,
        ..ChainConfig::default()
    };
    let result = run_chain(&sys, &HyperPriors::default(), &cfg, &CgConfig::default()).unwrap();
    assert_eq!(result.stats.count(), 1);
    assert_eq!(result.lambda_trace.len(), 11);
    let samples = result.samples.as_ref().unwrap();
    assert_eq!(samples.len(), 1);
    assert_eq!(result.stats.mean(), samples[0].as_slice());
    assert_eq!(result.stats.mean(), result.final_state.x.as_slice());
}

#[test]
fn streaming_statistics_match_two_pass_recomputation() {
    let sys = synthetic_system(5, 5, 0.02, 33);
    let cfg = ChainConfig {
        iterations: 300,
        burn_in: 50,
        seed: 34,
        thin: 3,
        max_restarts: 0,
        keep_samples: true,
        ..ChainConfig::default()
    };
    let result = run_chain(&sys, &HyperPriors::default(), &cfg, &CgConfig::default()).unwrap();
    let samples = result.samples.as_ref().unwrap();
    assert_eq!(samples.len(), cfg.kept_count());
    assert_eq!(result.stats.count(), cfg.kept_count());
    let count = samples.len() as f64;
    let m = sys.m();
    let mean: Vec<f64> = (0..sys.n())
        .map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / count)
        .collect();
    for (got, want) in result.stats.mean().iter().zip(&mean) {
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
    for i in [0, m / 2, m - 1] {
        let cov = result.stats.covariance(i).unwrap();
        let uv = samples
            .iter()
            .map(|s| (s[i] - mean[i]) * (s[i + m] - mean[i + m]))
            .sum::<f64>()
            / (count - 1.0);
        let uu = samples.iter().map(|s| (s[i] - mean[i]).powi(2)).sum::<f64>() / (count - 1.0);
        let vv = samples.iter().map(|s| (s[i + m] - mean[i + m]).powi(2)).sum::<f64>() / (count - 1.0);
        assert!((cov[0][0] - uu).abs() <= 1e-10 * uu);
        assert!((cov[1][1] - vv).abs() <= 1e-10 * vv);
        assert!((cov[0][1] - uv).abs() <= 1e-10 * (uu * vv).sqrt());
    }
}

#[test]
fn effective_alpha_is_ratio_of_traces() {
    let sys = synthetic_system(4, 1, 0.02, 35);
    let cfg = ChainConfig {
        iterations: 40,
        burn_in: 15,
        seed: 36,
        max_restarts: 0,
        ..ChainConfig::default()
    };
    let result = run_chain(&sys, &HyperPriors::default(), &cfg, &CgConfig::default()).unwrap();
    let alpha = effective_alpha_trace(&result);
    assert_eq!(alpha.values.len(), cfg.iterations);
    assert_eq!(alpha.burn_in, cfg.burn_in);
    for k in 0..cfg.iterations {
        assert_eq!(alpha.values[k], result.delta_trace[k] / result.lambda_trace[k]);
    }
    let tail: Vec<f64> = (cfg.burn_in..cfg.iterations)
        .map(|k| result.delta_trace[k] / result.lambda_trace[k])
        .collect();
    assert_eq!(alpha.post_burn_in(), tail.as_slice());
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!((alpha.posterior_mean() - mean).abs() <= 1e-15 * mean);
}

#[test]
fn invalid_configuration_is_rejected() {
    let sys = synthetic_system(3, 1, 0.0, 37);
    let priors = HyperPriors::default();
    let cg = CgConfig::default();
    let bad_burn = ChainConfig {
        iterations: 10,
        burn_in: 10,
        ..ChainConfig::default()
    };
    assert!(run_chain(&sys, &priors, &bad_burn, &cg).is_err());
    let bad_prior = HyperPriors {
        beta_delta: 0.0,
        ..priors
    };
    assert!(run_chain(&sys, &bad_prior, &ChainConfig::default(), &cg).is_err());
}
