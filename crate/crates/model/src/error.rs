use eabnet_dsp::DspError;
use eabnet_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration at {layer}: {message}")]
    Config { layer: String, message: String },
    #[error("input does not match the model: {0}")]
    Input(String),
    #[error("checkpoint header: {0}")]
    Header(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

pub(crate) fn config_err(layer: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Config { layer: layer.into(), message: message.into() }
}
