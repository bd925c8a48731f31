use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("state diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("singular frequency response at omega = {omega}: e^(j omega dt) is within {tol:e} of an eigenvalue")]
    Singular { omega: f64, tol: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by unreadable or malformed input files.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format { .. } | Error::Json { .. })
    }

    /// True for errors raised by a numerical routine rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. } | Error::RankDeficient(_) | Error::Singular { .. } | Error::Numerical(_)
        )
    }
}
