use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(&'static str),
    /// A matrix that must be positive definite could not be factorized.
    #[error("{what} is not positive definite (condition number estimate {condition:e})")]
    Singular { what: &'static str, condition: f64 },
    /// No feasible one-to-one assignment exists.
    #[error("assignment problem is infeasible")]
    Infeasible,
    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
