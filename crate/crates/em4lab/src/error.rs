use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },

    #[error("unbound variable `{name}`")]
    UnboundVariable { name: String },

    #[error("domain error in `{expr}`: {message}")]
    EvalDomain { expr: String, message: String },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("metric is not positive definite: {0}")]
    NotSpd(String),

    #[error("operation requires dimension {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },

    #[error("finite-difference stencil leaves the chart domain at coordinate `{coord}` (x = {value}, domain [{lo}, {hi}])")]
    StencilOutOfDomain {
        coord: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("tensor symmetry violation: {0}")]
    SymmetryViolation(String),

    #[error("orientation error: {0}")]
    Orientation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spec validation error: {0}")]
    Validation(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("optimization did not converge after {iterations} iterations (|grad| = {grad_norm:.3e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("parameter left the search box at {0}")]
    BoundaryHit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("toml error: {0}")]
    Toml(String),
}

pub type Result<T> = std::result::Result<T, Error>;
