use thiserror::Error;

/// Errors raised by mesh construction, space building, assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate mesh: element {element} has non-positive Jacobian determinant {det:e}")]
    DegenerateMesh { element: usize, det: f64 },

    #[error("gradient requested at the crack tip singularity")]
    SingularPoint,

    #[error("no unisolvent set for node {node}: {reason}")]
    Unisolvence { node: usize, reason: String },

    #[error("node {l} is not in the unisolvent set of node {i}")]
    NotInSupport { i: usize, l: usize },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("factorization failed at pivot {pivot}")]
    Factorization { pivot: usize },

    #[error("eigenvalue iteration did not converge; estimate in [{lower:e}, {upper:e}]")]
    EigenFailure { lower: f64, upper: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
