use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("resource limit: {what} exceeds the work cap of {cap}")]
    ResourceLimit { what: String, cap: u64 },

    #[error("construction failed: suffix constraint violated at index {index} ({detail})")]
    Construction { index: usize, detail: String },

    #[error("degenerate fit: no variation in {direction}")]
    DegenerateFit { direction: &'static str },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
