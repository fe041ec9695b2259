use thiserror::Error;

/// Failure modes shared across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Tensor or state dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument violated a documented precondition (non-unitary gate,
    /// non-Hermitian observable, mismatched measurement basis, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A projective measurement selected an outcome with vanishing Born
    /// probability.
    #[error("zero-probability branch at site {site} (p = {probability:e})")]
    ZeroProbability { site: usize, probability: f64 },

    /// A dense or enumerative computation exceeded its hard size limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A dense factorization failed to converge.
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    /// Malformed observable or configuration text.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
