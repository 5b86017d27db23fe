//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A linear solve or other numerical routine failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A conditional marginal is (numerically) deterministic, so the
    /// information distance is undefined for this query point.
    #[error("degenerate marginal: {0}")]
    DegenerateMarginal(String),

    /// All pairwise feature distances are zero.
    #[error("degenerate feature set: {0}")]
    DegenerateFeatures(String),

    /// Kernel-regression weights summed to nothing usable.
    #[error("empty conditional estimate: {0}")]
    EmptyConditional(String),

    /// Training diverged (loss became non-finite).
    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// A file could not be read or written.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A file parsed but its contents violate the declared schema.
    #[error("format error: {0}")]
    Format(String),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
