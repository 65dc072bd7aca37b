use std::path::Path;

use eabnet_dsp::WaveBuffer;
use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};

use crate::error::{IoError, Result};

/// On-disk sample encoding.
///
/// PCM16 stores `round(x · 32768)` clamped to `[-32768, 32767]` and reads
/// back `v / 32768`, so in-range samples round-trip within `1/32768`.
/// Float32 stores samples rounded to `f32`; values that are already
/// `f32`-representable round-trip bit-identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    Pcm16,
    #[default]
    Float32,
}

const PCM_SCALE: f64 = 32768.0;

fn classify(path: &Path, err: hound::Error) -> IoError {
    match err {
        hound::Error::IoError(source) => IoError::Io { path: path.to_path_buf(), source },
        hound::Error::Unsupported => {
            IoError::UnsupportedCodec { path: path.to_path_buf(), detail: "unsupported format".into() }
        }
        other => IoError::MalformedWav { path: path.to_path_buf(), detail: other.to_string() },
    }
}

/// Reads a PCM16 or float32 WAV file of any channel count.
pub fn read_wav(path: impl AsRef<Path>) -> Result<WaveBuffer> {
    read_wav_with_format(path).map(|(w, _)| w)
}

pub fn read_wav_with_format(path: impl AsRef<Path>) -> Result<(WaveBuffer, SampleFormat)> {
    let path = path.as_ref();
    let mut reader = WavReader::open(path).map_err(|e| classify(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(IoError::MalformedWav { path: path.to_path_buf(), detail: "zero channels".into() });
    }
    let (samples, format): (Vec<f64>, SampleFormat) = match (spec.sample_format, spec.bits_per_sample) {
        (HoundFormat::Int, 16) => (
            reader
                .samples::<i16>()
                .map(|s| s.map(|v| v as f64 / PCM_SCALE))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| classify(path, e))?,
            SampleFormat::Pcm16,
        ),
        (HoundFormat::Float, 32) => (
            reader
                .samples::<f32>()
                .map(|s| s.map(|v| v as f64))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| classify(path, e))?,
            SampleFormat::Float32,
        ),
        (fmt, bits) => {
            return Err(IoError::UnsupportedCodec {
                path: path.to_path_buf(),
                detail: format!("{bits}-bit {fmt:?}; only 16-bit PCM and 32-bit float are supported"),
            })
        }
    };
    if samples.len() % channels != 0 {
        return Err(IoError::MalformedWav {
            path: path.to_path_buf(),
            detail: format!("{} samples not divisible by {channels} channels", samples.len()),
        });
    }
    let frames = samples.len() / channels;
    let mut data = vec![Vec::with_capacity(frames); channels];
    for frame in samples.chunks_exact(channels) {
        for (ch, &v) in frame.iter().enumerate() {
            data[ch].push(v);
        }
    }
    Ok((WaveBuffer::new(data, spec.sample_rate)?, format))
}

/// Writes `wave` interleaved, creating or truncating `path`.
pub fn write_wav(path: impl AsRef<Path>, wave: &WaveBuffer, format: SampleFormat) -> Result<()> {
    let path = path.as_ref();
    let channels = u16::try_from(wave.num_channels()).map_err(|_| IoError::UnsupportedCodec {
        path: path.to_path_buf(),
        detail: format!("{} channels", wave.num_channels()),
    })?;
    let spec = match format {
        SampleFormat::Pcm16 => {
            WavSpec { channels, sample_rate: wave.sample_rate(), bits_per_sample: 16, sample_format: HoundFormat::Int }
        }
        SampleFormat::Float32 => WavSpec {
            channels,
            sample_rate: wave.sample_rate(),
            bits_per_sample: 32,
            sample_format: HoundFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| classify(path, e))?;
    for i in 0..wave.len() {
        for ch in wave.channels() {
            let r = match format {
                SampleFormat::Pcm16 => {
                    let q = (ch[i] * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(q)
                }
                SampleFormat::Float32 => writer.write_sample(ch[i] as f32),
            };
            r.map_err(|e| classify(path, e))?;
        }
    }
    writer.finalize().map_err(|e| classify(path, e))
}

/// Fails unless `wave` is sampled at `rate`.
pub fn require_sample_rate(wave: &WaveBuffer, rate: u32) -> Result<()> {
    if wave.sample_rate() != rate {
        return Err(IoError::RateMismatch { expected: rate, found: wave.sample_rate() });
    }
    Ok(())
}
