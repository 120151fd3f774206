use thiserror::Error;

/// Errors produced by the noise models.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the physical or mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller violated a structural contract (mismatched dimensions, ranges).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numerical procedure failed to converge or bracket a root.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
