use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library and the experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite denoiser input (a = {a}, b = {b})")]
    NonFiniteInput { a: f64, b: f64 },

    #[error("AMP diverged at iteration {iteration}: non-finite values in the {quantity}")]
    Divergence {
        iteration: usize,
        quantity: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("malformed instance file: {0}")]
    Format(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
