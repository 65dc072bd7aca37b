use thiserror::Error;

#[derive(Debug, Error)]
pub enum RoomError {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("cannot scale noise to the requested SNR: {0} has zero energy on the reference channel")]
    ZeroEnergy(&'static str),
    #[error("scene rejection budget of {0} draws exhausted")]
    Exhausted(usize),
    #[error(transparent)]
    Io(#[from] eabnet_io::IoError),
    #[error(transparent)]
    Wave(#[from] eabnet_dsp::DspError),
    #[error("{context}: {source}")]
    Fs { context: String, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, RoomError>;
