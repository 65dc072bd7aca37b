use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("invalid data: {0}")]
    Data(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] eabnet_model::ModelError),
    #[error(transparent)]
    Tensor(#[from] eabnet_tensor::TensorError),
    #[error(transparent)]
    Dsp(#[from] eabnet_dsp::DspError),
    #[error(transparent)]
    Beamform(#[from] eabnet_beamform::BeamformError),
    #[error(transparent)]
    Room(#[from] eabnet_room::RoomError),
    #[error(transparent)]
    Io(#[from] eabnet_io::IoError),
}

pub type Result<T> = std::result::Result<T, TrainError>;
