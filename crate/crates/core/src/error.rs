use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants follow the failure classes used throughout the crate: bad
/// arguments, requests beyond what the truncated model can represent,
/// numerical breakdowns, and accuracy checks that did not pass.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The request exceeds a configured capacity (degree, node count, ...).
    #[error("capability error: {0}")]
    Capability(String),

    /// A numerical routine failed (non-finite value, non-convergence).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A point lies outside the region where the truncation is trustworthy.
    #[error("range error: {0}")]
    Range(String),

    /// A self-check on accuracy failed (quadrature doubling, Hankel leak).
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// Inconsistent run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed serialized data.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
