use eabnet_dsp::ComplexSpectrogram;

use crate::error::{BeamformError, Result};

/// Real time-frequency mask in `[0, 1]`, stored `bins × frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMask {
    values: Vec<f64>,
    bins: usize,
    frames: usize,
}

impl TfMask {
    pub fn new(values: Vec<f64>, bins: usize, frames: usize) -> Result<Self> {
        if values.len() != bins * frames {
            return Err(BeamformError::Shape(format!("{} mask values for {bins}x{frames}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(BeamformError::Mask(format!("value {v} outside [0, 1]")));
        }
        Ok(Self { values, bins, frames })
    }

    pub fn constant(value: f64, bins: usize, frames: usize) -> Result<Self> {
        Self::new(vec![value; bins * frames], bins, frames)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, f: usize, t: usize) -> f64 {
        self.values[f * self.frames + t]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `1 - m` pointwise.
    pub fn complement(&self) -> TfMask {
        TfMask { values: self.values.iter().map(|v| 1.0 - v).collect(), bins: self.bins, frames: self.frames }
    }
}

/// Ideal ratio mask `|S| / (|S| + |N|)` on channel 0 of each input, with
/// `0/0` taken as 0.5.
pub fn irm(speech: &ComplexSpectrogram, noise: &ComplexSpectrogram) -> Result<TfMask> {
    if speech.bins() != noise.bins() || speech.frames() != noise.frames() {
        return Err(BeamformError::Shape(format!(
            "speech {}x{} vs noise {}x{}",
            speech.bins(),
            speech.frames(),
            noise.bins(),
            noise.frames()
        )));
    }
    let (bins, frames) = (speech.bins(), speech.frames());
    let mut values = Vec::with_capacity(bins * frames);
    for f in 0..bins {
        for t in 0..frames {
            let s = speech.get(f, t, 0).norm();
            let n = noise.get(f, t, 0).norm();
            let total = s + n;
            values.push(if total == 0.0 { 0.5 } else { s / total });
        }
    }
    TfMask::new(values, bins, frames)
}
