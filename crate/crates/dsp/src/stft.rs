use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::spectrogram::ComplexSpectrogram;
use crate::wave::WaveBuffer;

/// Analysis/synthesis window family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann.
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; len],
        }
    }
}

/// Framing parameters. Defaults: 20 ms periodic Hann at 16 kHz, 50 %
/// overlap, 320-point FFT (161 bins).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub window: WindowKind,
    pub frame_length: usize,
    pub frame_shift: usize,
    pub fft_size: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { window: WindowKind::Hann, frame_length: 320, frame_shift: 160, fft_size: 320 }
    }
}

impl StftConfig {
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of frames for a signal of `len` samples (tail zero-padded).
    pub fn frames_for(&self, len: usize) -> usize {
        len.div_ceil(self.frame_shift)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 || self.frame_shift == 0 {
            return Err(DspError::InvalidConfig("frame length and shift must be positive".into()));
        }
        if self.fft_size < self.frame_length {
            return Err(DspError::InvalidConfig(format!(
                "fft size {} shorter than frame length {}",
                self.fft_size, self.frame_length
            )));
        }
        if self.frame_length % self.frame_shift != 0 {
            return Err(DspError::InvalidConfig(format!(
                "frame shift {} does not divide frame length {}",
                self.frame_shift, self.frame_length
            )));
        }
        // Constant overlap-add of the analysis window at this shift.
        let w = self.window.coefficients(self.frame_length);
        let sums: Vec<f64> = (0..self.frame_shift)
            .map(|n| w.iter().skip(n).step_by(self.frame_shift).sum())
            .collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        if sums.iter().any(|s| (s - mean).abs() > 1e-9 * mean.max(1.0)) {
            return Err(DspError::InvalidConfig(format!(
                "{:?} window is not COLA at shift {}",
                self.window, self.frame_shift
            )));
        }
        Ok(())
    }

    fn check_compatible(&self, spec: &ComplexSpectrogram) -> Result<()> {
        if spec.fft_size != self.fft_size
            || spec.frame_length != self.frame_length
            || spec.frame_shift != self.frame_shift
        {
            return Err(DspError::ConfigMismatch(format!(
                "spectrogram has fft {} / length {} / shift {}, config has {} / {} / {}",
                spec.fft_size,
                spec.frame_length,
                spec.frame_shift,
                self.fft_size,
                self.frame_length,
                self.frame_shift
            )));
        }
        Ok(())
    }
}

/// Multichannel STFT. Frame `t` covers samples `[t*shift, t*shift+length)`;
/// the tail is zero-padded so that `T = ceil(len / shift)`.
pub fn stft(wave: &WaveBuffer, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    if wave.is_empty() {
        return Err(DspError::EmptySignal);
    }
    for (ch, samples) in wave.channels().iter().enumerate() {
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFinite { channel: ch, index });
        }
    }
    let bins = cfg.bins();
    let frames = cfg.frames_for(wave.len());
    let channels = wave.num_channels();
    let window = cfg.window.coefficients(cfg.frame_length);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);

    let mut data = vec![Complex64::new(0.0, 0.0); bins * frames * channels];
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
    for (p, samples) in wave.channels().iter().enumerate() {
        for t in 0..frames {
            let start = t * cfg.frame_shift;
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for (n, w) in window.iter().enumerate() {
                if let Some(&s) = samples.get(start + n) {
                    buf[n] = Complex64::new(s * w, 0.0);
                }
            }
            fft.process(&mut buf);
            for (f, z) in buf.iter().take(bins).enumerate() {
                data[(f * frames + t) * channels + p] = *z;
            }
        }
    }
    ComplexSpectrogram::from_raw(
        data,
        bins,
        frames,
        channels,
        cfg.frame_length,
        cfg.frame_shift,
        cfg.fft_size,
        wave.sample_rate(),
    )
}

/// Inverse STFT by weighted overlap-add, normalised pointwise by the summed
/// squared window. The output has `(T-1)*shift + length` samples, or
/// exactly `length` samples when given.
pub fn istft(
    spec: &ComplexSpectrogram,
    cfg: &StftConfig,
    length: Option<usize>,
) -> Result<WaveBuffer> {
    cfg.validate()?;
    cfg.check_compatible(spec)?;
    let n_fft = cfg.fft_size;
    let bins = spec.bins();
    let frames = spec.frames();
    let full_len = (frames - 1) * cfg.frame_shift + cfg.frame_length;
    let window = cfg.window.coefficients(cfg.frame_length);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n_fft);

    let mut norm = vec![0.0; full_len];
    for t in 0..frames {
        for (n, w) in window.iter().enumerate() {
            norm[t * cfg.frame_shift + n] += w * w;
        }
    }

    let mut channels = Vec::with_capacity(spec.channels());
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for p in 0..spec.channels() {
        let mut out = vec![0.0; full_len];
        for t in 0..frames {
            for (f, z) in buf.iter_mut().enumerate().take(bins) {
                *z = spec.get(f, t, p);
            }
            // Hermitian completion; DC and Nyquist imaginary parts are dropped.
            buf[0].im = 0.0;
            if n_fft % 2 == 0 {
                buf[n_fft / 2].im = 0.0;
            }
            for f in bins..n_fft {
                buf[f] = buf[n_fft - f].conj();
            }
            ifft.process(&mut buf);
            let start = t * cfg.frame_shift;
            for (n, w) in window.iter().enumerate() {
                out[start + n] += buf[n].re / n_fft as f64 * w;
            }
        }
        for (s, d) in out.iter_mut().zip(&norm) {
            *s = if *d > 1e-10 { *s / d } else { 0.0 };
        }
        if let Some(len) = length {
            out.resize(len, 0.0);
        }
        channels.push(out);
    }
    WaveBuffer::new(channels, spec.sample_rate)
}
