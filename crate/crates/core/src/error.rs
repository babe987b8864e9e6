use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the documented range of the operation.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The mathematical problem has no solution for the given inputs
    /// (degenerate nonlinearity, empty admissible set, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A root could not be bracketed or does not exist.
    #[error("no root: {0}")]
    NoRoot(String),

    /// A decision depends on a quantity that is numerically indistinguishable
    /// from zero.
    #[error("ambiguous: {0}")]
    Ambiguous(String),

    /// An algebraic identity failed beyond its tolerance, which points at an
    /// under-resolved quadrature.
    #[error("resolution fault: {0}")]
    Resolution(String),

    /// Non-finite values appeared during evaluation.
    #[error("overflow: {0}")]
    Overflow(String),

    /// A cross-check between independent estimates failed. This signals a
    /// bug in the constants rather than bad input.
    #[error("internal consistency violation: {0}")]
    Consistency(String),

    /// Constructing initial data failed.
    #[error("construction failed: {0}")]
    Construction(String),

    /// A documented precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Parsing a coefficient expression failed.
    #[error("expression error at byte {position}: {message}")]
    Expression { position: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
