use std::path::PathBuf;

/// Errors produced by the clustering engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or out-of-range input data.
    #[error("invalid input: {0}")]
    Input(String),

    /// A vertex pair ended up both must-linked and cannot-linked.
    #[error("constraint conflict: vertices {0} and {1} are both must-linked and cannot-linked")]
    ConstraintConflict(usize, usize),

    /// Two labelings that should align have different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Exhaustive search was asked for an instance that is too large.
    #[error("instance too large for exhaustive search: n = {n} (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
