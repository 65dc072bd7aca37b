use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed WAV: {detail}")]
    MalformedWav { path: PathBuf, detail: String },
    #[error("{path}: unsupported WAV encoding: {detail}")]
    UnsupportedCodec { path: PathBuf, detail: String },
    #[error("sample rate {found} Hz, expected {expected} Hz")]
    RateMismatch { expected: u32, found: u32 },
    #[error("{path}: expected schema {expected} v{expected_version}, found {found} v{found_version}")]
    SchemaMismatch {
        path: PathBuf,
        expected: String,
        expected_version: u32,
        found: String,
        found_version: u32,
    },
    #[error("{path}:{line}: {detail}")]
    BadRecord { path: PathBuf, line: usize, detail: String },
    #[error(transparent)]
    Wave(#[from] eabnet_dsp::DspError),
}

pub type Result<T> = std::result::Result<T, IoError>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}
