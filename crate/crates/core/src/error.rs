use thiserror::Error;

/// Errors raised by the analytic evaluators, simulators and comparison engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Floating-point evaluation lost too much precision to be trusted.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A requested size exceeds a configured limit.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// An iterative or series evaluation did not meet its stopping rule.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// Two independent evaluation routes disagree; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),

    /// Malformed textual input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
