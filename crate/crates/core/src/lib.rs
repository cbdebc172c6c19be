//! Bayesian optical flow by statistical inversion.
//!
//! Two grayscale frames give the linearized brightness-constancy system
//! `A x ≈ b` over the stacked flow `x = [u; v]`. A Gaussian likelihood with
//! noise precision `λ`, a smoothness prior with precision `δ L`, and Gamma
//! hyperpriors on both precisions give a posterior that a block Gibbs sampler
//! explores. The draws yield a mean flow, per-pixel confidence ellipses, and
//! the distribution of the effective regularization weight `δ/λ`, which links
//! back to classical Tikhonov estimates.
//!
//! The crate is `no_std` and needs only `alloc`. File formats and the command
//! line live in the companion `bayesflow-cli` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bench;
pub mod error;
pub mod grid_ops;
pub mod sampler;
pub mod solver;
pub mod uq;

pub use error::{Error, Result};
