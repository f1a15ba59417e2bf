use std::path::PathBuf;

use thiserror::Error;

use crate::backend::BackendError;

/// Process exit statuses of the command line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const UPSTREAM_MISSING: i32 = 3;
    pub const REFUSAL: i32 = 4;
    pub const PARTIAL: i32 = 5;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing upstream artifact {}: {hint}", path.display())]
    UpstreamMissing { path: PathBuf, hint: String },
    #[error("{0}")]
    Refusal(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] peer_eval_core::Error),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Other(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::UpstreamMissing { .. } => exit::UPSTREAM_MISSING,
            Self::Refusal(_) => exit::REFUSAL,
            _ => exit::OTHER,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
