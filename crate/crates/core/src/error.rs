use thiserror::Error;

/// Errors raised by the discretization and solver routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the mathematical domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: expected {expected} values, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("dense size guard: dimension {n} exceeds limit {limit}")]
    SizeGuard { n: usize, limit: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("linear solver failure: {0}")]
    LinearSolver(String),
}

impl Error {
    /// True for failures of an iterative or direct solve, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::LinearSolver(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
