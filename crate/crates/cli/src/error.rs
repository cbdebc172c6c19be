//! Command-line errors and their exit codes.

use std::path::{Path, PathBuf};

use crate::imageio::{ImageError, PgmError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    BadInput(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Pgm {
        path: PathBuf,
        #[source]
        source: PgmError,
    },
    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: ImageError,
    },
    #[error("case {case}: {source}")]
    Numerical {
        case: String,
        #[source]
        source: bayesflow::Error,
    },
    #[error("missing run outputs: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    Missing(Vec<PathBuf>),
    #[error("case {0}: chain did not reach a stationary state after all restarts")]
    NotConverged(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::BadInput(_) | Self::Pgm { .. } | Self::Image { .. } => 2,
            Self::Numerical { .. } | Self::NotConverged(_) => 3,
            Self::Io { .. } | Self::Missing(_) => 4,
        }
    }
}
