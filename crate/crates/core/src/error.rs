use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid size {0}: at least 2 points are required")]
    InvalidSize(usize),

    #[error("parameter `{name}` out of domain: {value}")]
    Domain { name: &'static str, value: f64 },

    #[error("numerical breakdown at CG iteration {iteration}")]
    Breakdown { iteration: usize },

    #[error("CG stopped after {iterations} iterations at relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("insufficient data: need at least {needed} samples, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}
