//! Crate-wide error type.

/// Errors produced by distribution algebra, samplers, and verifiers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical procedure failed to converge or degenerated.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Malformed textual input (tree strings, distribution literals).
    #[error("parse error: {0}")]
    Parse(String),
    /// A guard against combinatorial blow-up was exceeded.
    #[error("resource limit: {0}")]
    Resource(String),
    /// A sampling budget was exhausted before the operation finished.
    #[error("budget exhausted: {0}")]
    Budget(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
