//! Error types shared by all modules.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument was outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A nested logarithm hit a non-positive argument at the given level
    /// (1-based, counting from the innermost log).
    #[error("nested log undefined: argument became non-positive at level {level} of {levels}")]
    NestedLogDomain { level: u32, levels: u32 },

    /// A structurally invalid parameter (wrong sign, zero count, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The blocklength is too small for the requested construction.
    #[error("blocklength too small: {0}")]
    BlocklengthTooSmall(String),

    /// Operation requires a different number of users than the code provides.
    #[error("arity error: expected {expected} users, code has {actual}")]
    Arity { expected: usize, actual: usize },

    /// Mismatched lengths between related sequences.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A message index outside the code's message set.
    #[error("message out of range: user {user} message {message} not in 1..={count}")]
    MessageOutOfRange {
        user: usize,
        message: u128,
        count: u128,
    },

    /// No solution exists where one was required (e.g. no quartic root in (0,1)).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// All coefficients of a polynomial were zero.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
