use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{0}")]
    Usage(String),

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{0}")]
    MissingReference(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Numerical(#[from] threefield_core::Error),

    #[error("study aborted at N = {n} ({source}); partial results in {}", report.display())]
    Aborted { n: usize, report: PathBuf, source: threefield_core::Error },
}

impl LabError {
    /// Process exit code: 1 for usage and input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Usage(_) | LabError::Config { .. } | LabError::MissingReference(_) | LabError::Io { .. } => 1,
            LabError::Numerical(e) => match e {
                threefield_core::Error::InvalidArgument(_) | threefield_core::Error::Io(_) => 1,
                _ => 2,
            },
            LabError::Aborted { .. } => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
