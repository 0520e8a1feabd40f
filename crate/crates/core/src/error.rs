use thiserror::Error;

/// Errors produced by the simulation and fitting layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{n} emitters exceed the dense capacity of {max}")]
    Capacity { n: usize, max: usize },
    #[error("steady state is not unique: null space has dimension {dim}")]
    NonUniqueSteadyState { dim: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cannot normalize: {0}")]
    Normalization(String),
    #[error("fit did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
