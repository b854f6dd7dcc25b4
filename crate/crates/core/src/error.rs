use thiserror::Error;

/// Errors raised when an operation is called outside its domain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} must lie strictly inside (0, 1), got {value}")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },

    #[error("a test must contain at least one item")]
    EmptyTest,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::ProbabilityOutOfRange { name, value })
    }
}
