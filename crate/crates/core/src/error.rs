use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the analysis library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid primitive: {0}")]
    InvalidPrimitive(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("missing or invalid property `{0}`")]
    Schema(String),

    #[error("truncated payload: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed header: {0}")]
    Header(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("point cloud too small: need more than {needed} points, got {got}")]
    CloudTooSmall { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("serialization failed: {0}")]
    Serialize(String),
}
