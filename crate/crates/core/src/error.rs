use thiserror::Error;

/// Errors raised by the library.
///
/// The CLI maps every variant to exit code 2; property and dominance
/// failures are reported through result types rather than errors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters in a distribution, goal, risk functional or config.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument lies outside the range where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical procedure failed to converge or produced a non-finite value.
    #[error("divergence error: {0}")]
    Divergence(String),
    /// The requested computation is not supported for this problem class.
    #[error("unsupported problem: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
