use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the crate.
///
/// Variants fall into four families which the CLI maps onto exit codes:
/// validation (2), numeric (3) and IO (4). Schema and parse failures count
/// as validation errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate class: no records with {class} in the sample")]
    DegenerateClass { class: &'static str },

    #[error("empty stratum {stratum}: target probability is positive but no training record falls in it")]
    EmptyStratum { stratum: usize },

    #[error("positivity violation: censoring survival is 0 just before the time of uncensored record {record}")]
    Positivity { record: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("parse error in {path} at line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }
}
