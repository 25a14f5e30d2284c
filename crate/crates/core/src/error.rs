use thiserror::Error;

/// Errors raised anywhere in the encode / transmit / decode / simulate chain.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid code, rule, channel or simulation parameters.
    #[error("configuration error: {0}")]
    Config(String),
    /// A received vector does not match the expected frame layout.
    #[error("framing error: expected {expected} values, got {actual}")]
    Framing { expected: usize, actual: usize },
    /// Two vectors that must be aligned have different lengths.
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    /// A non-finite value reached the decoder.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A stopping rule could not be evaluated.
    #[error("stopping rule error: {0}")]
    Rule(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn check_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LengthMismatch(a, b))
    }
}
