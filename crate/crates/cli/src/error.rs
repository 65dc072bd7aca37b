use eabnet_io::IoError;
use eabnet_model::ModelError;
use eabnet_train::TrainError;
use thiserror::Error;

/// Command failure, grouped into the categories reported by the exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or inconsistent configuration.
    #[error("{0}")]
    Config(String),
    /// Missing or malformed input: files, manifests, checkpoints, WAVs.
    #[error("{0}")]
    Input(String),
    /// Training diverged or another numerical failure.
    #[error("{0}")]
    Numerical(String),
    /// Writing outputs failed.
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Numerical(_) => "numerical",
            CliError::Output(_) => "output",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Output(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config { .. } => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<eabnet_tensor::TensorError> for CliError {
    fn from(e: eabnet_tensor::TensorError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<eabnet_room::RoomError> for CliError {
    fn from(e: eabnet_room::RoomError) -> Self {
        match e {
            eabnet_room::RoomError::Fs { .. } => CliError::Output(e.to_string()),
            eabnet_room::RoomError::Io(io) => io.into(),
            eabnet_room::RoomError::Invalid(_) | eabnet_room::RoomError::Geometry(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<eabnet_dsp::DspError> for CliError {
    fn from(e: eabnet_dsp::DspError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => CliError::Numerical(e.to_string()),
            TrainError::Config(_) => CliError::Config(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Io(io) => io.into(),
            TrainError::Room(r) => r.into(),
            TrainError::Beamform(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}
