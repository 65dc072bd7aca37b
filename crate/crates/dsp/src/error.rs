use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("empty signal")]
    EmptySignal,
    #[error("non-finite value at channel {channel}, index {index}")]
    NonFinite { channel: usize, index: usize },
    #[error("invalid wave buffer: {0}")]
    InvalidWave(String),
    #[error("invalid STFT configuration: {0}")]
    InvalidConfig(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("compression exponent must lie in (0, 1], got {0}")]
    InvalidExponent(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, DspError>;
