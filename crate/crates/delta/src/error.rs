use thiserror::Error;

#[derive(Debug, Error)]
pub enum DeltaError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("curvature {k} inconsistent with {kind} sampling")]
    CurvatureMismatch { kind: &'static str, k: f64 },
    #[error(transparent)]
    Geometry(#[from] hge_core::GeometryError),
}

pub type Result<T> = std::result::Result<T, DeltaError>;
