use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A monotone map could not be inverted because the target value is not
    /// attained on the available window.
    #[error("range error: value {value} outside achievable range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    /// A weight power is not integrable near the origin.
    #[error("integrability error: {0}")]
    Integrability(String),

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error("accuracy error: estimate {estimate} with error {error} after {evaluations} evaluations")]
    Accuracy {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    /// The limit extrapolation of a sequence failed.
    #[error("extrapolation error: {reason}; raw values {values:?}")]
    Extrapolation { reason: String, values: Vec<f64> },

    /// The partition sequences do not cover the required region.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// A proven inequality was violated beyond its tolerance budget.
    #[error("check failure: {name}: lhs {lhs} vs rhs {rhs} (margin {margin})")]
    CheckFailure {
        name: String,
        lhs: f64,
        rhs: f64,
        margin: f64,
    },

    /// Invalid construction parameters (hypothesis violations, malformed tables).
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
