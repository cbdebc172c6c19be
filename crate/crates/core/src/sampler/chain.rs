use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid_ops::FlowSystem;
use crate::sampler::gamma::sample_gamma;
use crate::sampler::stationarity::check_stationarity;
use crate::solver::{sample_conditional_x, CgConfig, CgStatus};

/// Gamma hyperpriors on the noise precision `λ` and prior precision `δ`
/// (shape/rate form).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperPriors {
    pub alpha_lambda: f64,
    pub beta_lambda: f64,
    pub alpha_delta: f64,
    pub beta_delta: f64,
}

impl Default for HyperPriors {
    fn default() -> Self {
        Self {
            alpha_lambda: 1.0,
            beta_lambda: 1e-4,
            alpha_delta: 1.0,
            beta_delta: 1e-4,
        }
    }
}

impl HyperPriors {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("alpha_lambda", self.alpha_lambda),
            ("beta_lambda", self.beta_lambda),
            ("alpha_delta", self.alpha_delta),
            ("beta_delta", self.beta_delta),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Domain { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Total Gibbs steps per attempt.
    pub iterations: usize,
    /// Leading steps excluded from statistics and the stationarity check.
    pub burn_in: usize,
    pub seed: u64,
    pub lambda0: f64,
    pub delta0: f64,
    /// Keep every `thin`-th post-burn-in draw.
    pub thin: usize,
    /// Extra attempts with fresh seeds when a chain fails the stationarity check.
    pub max_restarts: usize,
    /// Retain every kept draw of `x` in addition to the streaming statistics.
    pub keep_samples: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 1000,
            seed: 0,
            lambda0: 1.0,
            delta0: 1.0,
            thin: 1,
            max_restarts: 3,
            keep_samples: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Domain {
                name: "burn_in",
                value: self.burn_in as f64,
            });
        }
        if self.thin == 0 {
            return Err(Error::Domain {
                name: "thin",
                value: 0.0,
            });
        }
        for (name, value) in [("lambda0", self.lambda0), ("delta0", self.delta0)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Domain { name, value });
            }
        }
        Ok(())
    }

    /// Number of draws that enter the posterior statistics.
    pub fn kept_count(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }

    /// Seed used by attempt `attempt` (0 is the configured seed).
    pub fn attempt_seed(&self, attempt: usize) -> u64 {
        if attempt == 0 {
            self.seed
        } else {
            splitmix64(self.seed ^ splitmix64(attempt as u64))
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sampler state `(x^k, λ_k, δ_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub delta: f64,
    pub k: usize,
}

impl ChainState {
    pub fn initial(sys: &FlowSystem, lambda0: f64, delta0: f64) -> Self {
        Self {
            x: vec![0.0; sys.n()],
            lambda: lambda0,
            delta: delta0,
            k: 0,
        }
    }
}

/// Side information from one Gibbs step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub cg_iterations: usize,
    pub lambda_shape: f64,
    pub lambda_rate: f64,
    pub delta_shape: f64,
    pub delta_rate: f64,
}

/// One block Gibbs sweep.
///
/// Draws `x^k | λ_k, δ_k` from the Gaussian conditional, then
/// `λ_{k+1} ~ Γ(m/2 + α_λ, ½‖Ax^k − b‖² + β_λ)` and
/// `δ_{k+1} ~ Γ(n/2 + α_δ, ½ x^kᵀ L x^k + β_δ)`.
///
/// A CG solve that stops short of its tolerance fails the step with
/// [`Error::NotConverged`].
pub fn gibbs_step<R: Rng + ?Sized>(
    state: &ChainState,
    sys: &FlowSystem,
    priors: &HyperPriors,
    cg: &CgConfig,
    rng: &mut R,
) -> Result<(ChainState, StepInfo)> {
    let draw = sample_conditional_x(sys, state.lambda, state.delta, cg, rng)?;
    if draw.status != CgStatus::Converged {
        return Err(Error::NotConverged {
            iterations: draw.iterations,
            residual: draw.residual,
        });
    }
    let x = draw.x;

    let lambda_shape = sys.m() as f64 / 2.0 + priors.alpha_lambda;
    let lambda_rate = 0.5 * sys.residual_norm_sq(&x)? + priors.beta_lambda;
    let lambda = sample_gamma(lambda_shape, lambda_rate, rng)?;

    let delta_shape = sys.n() as f64 / 2.0 + priors.alpha_delta;
    let delta_rate = 0.5 * sys.regularity(&x)?.max(0.0) + priors.beta_delta;
    let delta = sample_gamma(delta_shape, delta_rate, rng)?;

    let info = StepInfo {
        cg_iterations: draw.iterations,
        lambda_shape,
        lambda_rate,
        delta_shape,
        delta_rate,
    };
    Ok((
        ChainState {
            x,
            lambda,
            delta,
            k: state.k + 1,
        },
        info,
    ))
}

/// Streaming per-pixel posterior moments (Welford updates).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorAccumulator {
    count: usize,
    mean: Vec<f64>,
    m2_uu: Vec<f64>,
    m2_uv: Vec<f64>,
    m2_vv: Vec<f64>,
}

impl PosteriorAccumulator {
    pub fn new(pixels: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; 2 * pixels],
            m2_uu: vec![0.0; pixels],
            m2_uv: vec![0.0; pixels],
            m2_vv: vec![0.0; pixels],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        let m = self.m2_uu.len();
        debug_assert_eq!(x.len(), 2 * m);
        self.count += 1;
        let c = self.count as f64;
        for i in 0..m {
            let du = x[i] - self.mean[i];
            let dv = x[i + m] - self.mean[i + m];
            self.mean[i] += du / c;
            self.mean[i + m] += dv / c;
            let ru = x[i] - self.mean[i];
            let rv = x[i + m] - self.mean[i + m];
            self.m2_uu[i] += du * ru;
            self.m2_uv[i] += du * rv;
            self.m2_vv[i] += dv * rv;
        }
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn pixels(&self) -> usize {
        self.m2_uu.len()
    }

    /// Running mean of the stacked `[u; v]`.
    #[inline]
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased covariance `[[uu, uv], [uv, vv]]` of pixel `i`, or `None` with
    /// fewer than two draws.
    pub fn covariance(&self, i: usize) -> Option<[[f64; 2]; 2]> {
        if self.count < 2 {
            return None;
        }
        let d = (self.count - 1) as f64;
        let uv = self.m2_uv[i] / d;
        Some([[self.m2_uu[i] / d, uv], [uv, self.m2_vv[i] / d]])
    }
}

/// How one chain attempt ended.
#[derive(Debug, Clone, PartialEq)]
pub enum AttemptOutcome {
    Stationary,
    NonStationary,
    Failed(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptRecord {
    pub seed: u64,
    pub outcome: AttemptOutcome,
}

/// Output of [`run_chain`]: traces and statistics of the reported attempt plus
/// the restart log.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    /// `λ_{k+1}` for every step `k`.
    pub lambda_trace: Vec<f64>,
    /// `δ_{k+1}` for every step `k`.
    pub delta_trace: Vec<f64>,
    pub burn_in: usize,
    pub thin: usize,
    pub stats: PosteriorAccumulator,
    /// Every kept draw when [`ChainConfig::keep_samples`] is set.
    pub samples: Option<Vec<Vec<f64>>>,
    pub restart_count: usize,
    pub converged: bool,
    pub attempts: Vec<AttemptRecord>,
    pub cg_iterations_total: usize,
    pub final_state: ChainState,
}

fn run_attempt(
    sys: &FlowSystem,
    priors: &HyperPriors,
    cfg: &ChainConfig,
    cg: &CgConfig,
    seed: u64,
) -> Result<ChainResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ChainState::initial(sys, cfg.lambda0, cfg.delta0);
    let mut lambda_trace = Vec::with_capacity(cfg.iterations);
    let mut delta_trace = Vec::with_capacity(cfg.iterations);
    let mut stats = PosteriorAccumulator::new(sys.m());
    let mut samples = cfg.keep_samples.then(Vec::new);
    let mut cg_iterations_total = 0;

    for k in 0..cfg.iterations {
        let (next, info) = gibbs_step(&state, sys, priors, cg, &mut rng)?;
        state = next;
        lambda_trace.push(state.lambda);
        delta_trace.push(state.delta);
        cg_iterations_total += info.cg_iterations;
        if k >= cfg.burn_in && (k - cfg.burn_in).is_multiple_of(cfg.thin) {
            stats.push(&state.x);
            if let Some(s) = samples.as_mut() {
                s.push(state.x.clone());
            }
        }
    }

    Ok(ChainResult {
        lambda_trace,
        delta_trace,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        stats,
        samples,
        restart_count: 0,
        converged: false,
        attempts: Vec::new(),
        cg_iterations_total,
        final_state: state,
    })
}

/// Runs the block Gibbs sampler, restarting from a fresh seed when the
/// post-burn-in `δ/λ` trace is not stationary.
///
/// After `max_restarts` failed restarts the last completed attempt is returned
/// with `converged == false`. Errors only on invalid configuration or when no
/// attempt completes at all.
pub fn run_chain(sys: &FlowSystem, priors: &HyperPriors, cfg: &ChainConfig, cg: &CgConfig) -> Result<ChainResult> {
    priors.validate()?;
    cfg.validate()?;
    cg.validate()?;

    let mut attempts = Vec::new();
    let mut last_completed: Option<ChainResult> = None;
    let mut last_error = None;
    for attempt in 0..=cfg.max_restarts {
        let seed = cfg.attempt_seed(attempt);
        match run_attempt(sys, priors, cfg, cg, seed) {
            Ok(mut result) => {
                let stationary = check_stationarity(&effective_alpha_trace(&result).values, cfg.burn_in);
                attempts.push(AttemptRecord {
                    seed,
                    outcome: if stationary {
                        AttemptOutcome::Stationary
                    } else {
                        AttemptOutcome::NonStationary
                    },
                });
                if stationary {
                    result.converged = true;
                    result.restart_count = attempt;
                    result.attempts = attempts;
                    return Ok(result);
                }
                log::warn!("chain attempt {attempt} (seed {seed}) is not stationary after burn-in");
                last_completed = Some(result);
            }
            Err(err) => {
                log::warn!("chain attempt {attempt} (seed {seed}) failed: {err}");
                attempts.push(AttemptRecord {
                    seed,
                    outcome: AttemptOutcome::Failed(err.clone()),
                });
                last_error = Some(err);
            }
        }
    }

    match last_completed {
        Some(mut result) => {
            result.converged = false;
            result.restart_count = cfg.max_restarts;
            result.attempts = attempts;
            Ok(result)
        }
        None => Err(last_error.expect("at least one attempt ran")),
    }
}

/// The effective regularization parameter `δ_k / λ_k` along a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTrace {
    pub values: Vec<f64>,
    /// Index of the first post-burn-in entry.
    pub burn_in: usize,
}

impl AlphaTrace {
    pub fn post_burn_in(&self) -> &[f64] {
        &self.values[self.burn_in.min(self.values.len())..]
    }

    /// Mean over the post-burn-in entries.
    pub fn posterior_mean(&self) -> f64 {
        let tail = self.post_burn_in();
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

pub fn effective_alpha_trace(result: &ChainResult) -> AlphaTrace {
    AlphaTrace {
        values: result
            .lambda_trace
            .iter()
            .zip(&result.delta_trace)
            .map(|(l, d)| d / l)
            .collect(),
        burn_in: result.burn_in,
    }
}
