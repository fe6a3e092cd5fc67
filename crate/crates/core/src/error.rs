use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("points live on different manifolds (K = {left} vs K = {right})")]
    ManifoldMismatch { left: f64, right: f64 },
    #[error("curvature must be strictly negative, got {0}")]
    InvalidCurvature(f64),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("operation requires a non-empty input")]
    EmptyInput,
}

pub type Result<T> = std::result::Result<T, GeometryError>;
