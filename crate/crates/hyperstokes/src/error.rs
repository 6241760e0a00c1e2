use thiserror::Error;

/// Failures raised by the numerical modules.
///
/// Every message names the condition that was violated so that CLI reports
/// can surface it verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("flux compatibility violated (ring integral of h must vanish): {0}")]
    Compatibility(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0}")]
    Smallness(String),
    #[error("pressure gluing failed: {0}")]
    Gluing(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
