//! Signal-processing foundation for the EaBNet toolkit.
//!
//! Provides multichannel waveform containers, a frequency-major complex
//! spectrogram, a Hann-windowed STFT/ISTFT pair with weighted overlap-add
//! synthesis, and phase-preserving magnitude power compression.
//!
//! Everything here is format-free: audio file handling lives in `eabnet-io`.

mod compress;
mod error;
mod spectrogram;
mod stft;
mod wave;

pub use compress::{compress, compress_value, decompress, decompress_value};
pub use error::{DspError, Result};
pub use spectrogram::ComplexSpectrogram;
pub use stft::{istft, stft, StftConfig, WindowKind};
pub use wave::WaveBuffer;

pub use num_complex::Complex64;

/// Default pipeline sample rate in Hz.
pub const SAMPLE_RATE: u32 = 16_000;
