//! File formats, run manifests and commands behind the `bayesflow` binary.

pub mod commands;
pub mod error;
pub mod imageio;
pub mod manifest;

pub use error::CliError;
