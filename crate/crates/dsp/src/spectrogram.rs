use num_complex::Complex64;

use crate::error::{DspError, Result};

/// Complex STFT tensor with `bins × frames × channels` layout.
///
/// Storage is frequency-major: the element for bin `f`, frame `t` and
/// channel `p` sits at `(f * frames + t) * channels + p`, so every
/// per-subband operation walks contiguous memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    data: Vec<Complex64>,
    bins: usize,
    frames: usize,
    channels: usize,
    pub frame_length: usize,
    pub frame_shift: usize,
    pub fft_size: usize,
    pub sample_rate: u32,
}

impl ComplexSpectrogram {
    /// Zero spectrogram with framing metadata copied from `like`.
    pub fn zeros_like(like: &ComplexSpectrogram, channels: usize) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); like.bins * like.frames * channels],
            bins: like.bins,
            frames: like.frames,
            channels,
            frame_length: like.frame_length,
            frame_shift: like.frame_shift,
            fft_size: like.fft_size,
            sample_rate: like.sample_rate,
        }
    }

    /// Builds a spectrogram from raw frequency-major data. `bins` must be
    /// `fft_size / 2 + 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_raw(
        data: Vec<Complex64>,
        bins: usize,
        frames: usize,
        channels: usize,
        frame_length: usize,
        frame_shift: usize,
        fft_size: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        if bins != fft_size / 2 + 1 {
            return Err(DspError::Shape(format!(
                "{bins} bins inconsistent with fft size {fft_size}"
            )));
        }
        if frames == 0 || channels == 0 {
            return Err(DspError::Shape("spectrogram needs at least one frame and channel".into()));
        }
        if data.len() != bins * frames * channels {
            return Err(DspError::Shape(format!(
                "{} values for {bins}x{frames}x{channels}",
                data.len()
            )));
        }
        Ok(Self { data, bins, frames, channels, frame_length, frame_shift, fft_size, sample_rate })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn index(&self, f: usize, t: usize, p: usize) -> usize {
        (f * self.frames + t) * self.channels + p
    }

    #[inline]
    pub fn get(&self, f: usize, t: usize, p: usize) -> Complex64 {
        self.data[self.index(f, t, p)]
    }

    #[inline]
    pub fn set(&mut self, f: usize, t: usize, p: usize, value: Complex64) {
        let i = self.index(f, t, p);
        self.data[i] = value;
    }

    /// All channels of one time-frequency point.
    pub fn point(&self, f: usize, t: usize) -> &[Complex64] {
        let start = self.index(f, t, 0);
        &self.data[start..start + self.channels]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Single-channel copy of channel `p`.
    pub fn select_channel(&self, p: usize) -> ComplexSpectrogram {
        let mut out = ComplexSpectrogram::zeros_like(self, 1);
        for f in 0..self.bins {
            for t in 0..self.frames {
                out.set(f, t, 0, self.get(f, t, p));
            }
        }
        out
    }

    /// Stacks single- or multichannel spectrograms along the channel axis.
    pub fn concat_channels(parts: &[&ComplexSpectrogram]) -> Result<ComplexSpectrogram> {
        let first = parts
            .first()
            .ok_or_else(|| DspError::Shape("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.bins != first.bins || p.frames != first.frames) {
            return Err(DspError::Shape("bin or frame counts differ".into()));
        }
        let channels: usize = parts.iter().map(|p| p.channels).sum();
        let mut out = ComplexSpectrogram::zeros_like(first, channels);
        for f in 0..first.bins {
            for t in 0..first.frames {
                let mut offset = 0;
                for part in parts {
                    for p in 0..part.channels {
                        out.set(f, t, offset + p, part.get(f, t, p));
                    }
                    offset += part.channels;
                }
            }
        }
        Ok(out)
    }

    /// Keeps the first `frames` frames (at least one).
    pub fn truncated(&self, frames: usize) -> ComplexSpectrogram {
        let frames = frames.clamp(1, self.frames);
        let mut data = Vec::with_capacity(self.bins * frames * self.channels);
        for f in 0..self.bins {
            let start = self.index(f, 0, 0);
            data.extend_from_slice(&self.data[start..start + frames * self.channels]);
        }
        ComplexSpectrogram { data, frames, ..self.clone() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexSpectrogram {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z = f(*z));
        out
    }
}
