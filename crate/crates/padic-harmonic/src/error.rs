//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation lost every known digit of a scalar, so even its
    /// valuation is unknown.
    #[error("p-adic precision exhausted: {0}")]
    PrecisionExhausted(String),

    /// Mixing scalars or functions that live over different primes.
    #[error("prime mismatch: {0} vs {1}")]
    PrimeMismatch(u64, u64),

    /// Division by an (exact) zero scalar, or inversion of a singular matrix.
    #[error("division by zero: {0}")]
    DivisionByZero(String),

    /// A requested window or precision does not fit the representable range.
    #[error("window out of range: {0}")]
    WindowOutOfRange(String),

    /// An input failed a structural precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative truncation failed to stabilize within its budget.
    #[error("stabilization failed: {0}")]
    StabilizationFailed(String),

    /// Config or data file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
