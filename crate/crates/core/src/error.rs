use thiserror::Error;

use crate::sdp::SdpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("a relay cluster needs at least one relay")]
    EmptyCluster,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("value outside the domain of {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    #[error("operation requires reciprocal channels (h1r == h1 and h2r == h2)")]
    NotReciprocal,

    #[error("degenerate channel: {0}")]
    Degenerate(String),

    #[error("grid search over {k} relays is too large (max {max}); use the random search instead")]
    GridTooLarge { k: usize, max: usize },

    #[error(transparent)]
    Sdp(#[from] SdpError),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
