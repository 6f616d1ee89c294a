use thiserror::Error;

use crate::grid::Space;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("grid not dyadic-aligned: {0}")]
    Misaligned(String),
    #[error("exponent assumption violated: {0}")]
    Assumption(String),
    #[error("field is in the wrong representation (expected {0:?})")]
    WrongSpace(Space),
    #[error("band overflow: {0}")]
    BandOverflow(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("greedy decomposition stalled: {0}")]
    Stall(String),
    #[error("extraction failure: {0}")]
    Extraction(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
