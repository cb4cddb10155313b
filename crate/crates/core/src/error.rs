use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("request at ({x}, {y}) lies outside the domain box")]
    OutsideDomain { x: f64, y: f64 },

    #[error("requested scale {scale} exceeds grid depth {depth}")]
    ScaleTooLarge { scale: u32, depth: u32 },

    #[error("invalid domain box: {0}")]
    InvalidDomain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("stencil unavailable at node {node}: {reason}")]
    StencilUnavailable { node: usize, reason: String },

    #[error("boundary data at node {node} is ill-posed: {reason}")]
    IllPosedBoundary { node: usize, reason: String },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("grid function belongs to generation {found}, operator expects {expected}")]
    GenerationMismatch { expected: u64, found: u64 },

    #[error("problem data invalid: {0}")]
    Problem(String),

    #[error("time step violates the CFL bound at node {node} (tau * L = {ratio})")]
    Instability { node: usize, ratio: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("step limit {steps} reached at t = {t}")]
    StepLimit { steps: usize, t: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
