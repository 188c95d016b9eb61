//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any oodkit operation.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of two operands do not line up.
    #[error("dimension mismatch: {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A matrix could not be factorized even at the largest allowed jitter.
    #[error("factorization failed for jitter from {smallest:e} up to the cap {cap:e}")]
    SingularMatrix { smallest: f64, cap: f64 },

    /// Training produced a non-finite loss.
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    /// A binary file did not match the expected layout.
    #[error("malformed file at byte offset {offset}: {message}")]
    MalformedFile { offset: usize, message: String },

    /// A text file failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The file declares a format version this build does not understand.
    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    /// Bad or inconsistent pipeline configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for usage/configuration mistakes, false for runtime/data failures.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Config(_) | Error::DimensionMismatch { .. }
        )
    }
}
