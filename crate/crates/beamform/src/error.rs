use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamformError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degenerate steering at bin {bin}: covariance is zero")]
    DegenerateSteering { bin: usize },
    #[error("singular noise covariance at bin {bin} after diagonal loading")]
    Singular { bin: usize },
    #[error("invalid mask: {0}")]
    Mask(String),
}

pub type Result<T> = std::result::Result<T, BeamformError>;
