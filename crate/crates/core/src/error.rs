use thiserror::Error;

use crate::lattice::{EdgeId, Vertex};

#[derive(Debug, Error)]
pub enum GeodesyError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("outside the box: {0}")]
    OutOfBox(String),
    #[error("fixture has no weight for edge {0:?}")]
    MissingFixtureEdge(EdgeId),
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("target has no vertex inside the box and mask")]
    EmptyTarget,
    #[error("vertex {0} cannot reach the target")]
    Unreachable(Vertex),
    #[error("object was built from a different environment")]
    EnvironmentMismatch,
    #[error("structural violation: {0}")]
    Structural(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("margin violation: {0}")]
    MarginViolation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = GeodesyError> = std::result::Result<T, E>;
