use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The requested configuration cannot hold a single transaction.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("malformed message: {0}")]
    Decode(String),

    /// Content-addressed lookup failed for the listed block positions.
    #[error("missing content for {} block position(s)", .0.len())]
    MissingContent(Vec<usize>),

    #[error("fit failed: {message} (residual {residual:.3e})")]
    Fit { message: String, residual: f64 },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
