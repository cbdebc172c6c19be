//! Block Gibbs sampling of `(x, λ, δ)` with conjugate Gamma hyperpriors.

mod chain;
mod gamma;
mod stationarity;

pub use chain::{
    effective_alpha_trace, gibbs_step, run_chain, AlphaTrace, AttemptOutcome, AttemptRecord, ChainConfig, ChainResult,
    ChainState, HyperPriors, PosteriorAccumulator, StepInfo,
};
pub use gamma::sample_gamma;
pub use stationarity::{check_stationarity, STATIONARITY_TOLERANCE};
