use thiserror::Error;

/// Errors produced by the exponent solvers and scheme simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("support of p is not contained in support of q (symbol {symbol})")]
    AbsoluteContinuityViolation { symbol: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("target probability {target} exceeds the typical-set mass {achievable}")]
    InfeasibleTarget { target: f64, achievable: f64 },

    #[error("malformed message: {0}")]
    MalformedMessage(String),

    #[error("the two channel output laws coincide")]
    DegenerateChannels,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
