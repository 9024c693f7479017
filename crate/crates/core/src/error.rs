use thiserror::Error;

use crate::models::Violation;

/// Errors raised by library operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("space has no metric")]
    MissingMetric,

    #[error("linear program failure: {0}")]
    LinearProgram(String),

    #[error("index out of range: {what} = {index} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("model validation failed with {} violation(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource guard exceeded: {0}")]
    ResourceGuard(String),

    #[error("missing value: {0}")]
    MissingValue(String),

    #[error("policy lookup failed: {0}")]
    UnreachableBelief(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
