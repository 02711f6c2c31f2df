use thiserror::Error;

/// Errors raised by the model, estimation and sampling routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical overflow in {0}")]
    Overflow(String),

    #[error("non-positive value in {0}")]
    NonPositive(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("degenerate confidence interval: {0}")]
    DegenerateInterval(String),

    #[error("bootstrap aborted: {failed} of {total} refits failed")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Returns `value` if finite, otherwise an overflow error naming `context`.
pub(crate) fn finite(value: f64, context: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow(context.to_string()))
    }
}
