use std::path::PathBuf;

/// Failures surfaced by the harness and CLI.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Malformed or inconsistent input, located by a field path.
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] outcome_rl_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Validation { path: path.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// `1` for validation failures, `2` for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
