use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};

/// Multichannel real waveform. Channels are stored separately and always
/// have equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveBuffer {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl WaveBuffer {
    /// Builds a buffer, validating equal channel lengths, a positive rate
    /// and finite samples.
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(DspError::InvalidWave("sample rate must be positive".into()));
        }
        if channels.is_empty() {
            return Err(DspError::InvalidWave("at least one channel required".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(DspError::InvalidWave("channels differ in length".into()));
        }
        for (ch, samples) in channels.iter().enumerate() {
            if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
                return Err(DspError::NonFinite { channel: ch, index });
            }
        }
        Ok(Self { channels, sample_rate })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    /// Silent buffer of the given shape.
    pub fn zeros(channels: usize, len: usize, sample_rate: u32) -> Self {
        Self {
            channels: vec![vec![0.0; len]; channels.max(1)],
            sample_rate: sample_rate.max(1),
        }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn channel_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Single-channel copy of channel `index`.
    pub fn select_channel(&self, index: usize) -> WaveBuffer {
        WaveBuffer {
            channels: vec![self.channels[index].clone()],
            sample_rate: self.sample_rate,
        }
    }

    /// Energy (sum of squares) of one channel.
    pub fn energy(&self, index: usize) -> f64 {
        self.channels[index].iter().map(|s| s * s).sum()
    }

    /// Copy truncated or zero-padded to `len` samples per channel.
    pub fn resized(&self, len: usize) -> WaveBuffer {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                let mut v = c.clone();
                v.resize(len, 0.0);
                v
            })
            .collect();
        WaveBuffer { channels, sample_rate: self.sample_rate }
    }

    pub fn scaled(&self, gain: f64) -> WaveBuffer {
        let channels = self
            .channels
            .iter()
            .map(|c| c.iter().map(|s| s * gain).collect())
            .collect();
        WaveBuffer { channels, sample_rate: self.sample_rate }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_channels() {
        let err = WaveBuffer::new(vec![vec![0.0; 3], vec![0.0; 4]], 16_000).unwrap_err();
        assert!(matches!(err, DspError::InvalidWave(_)));
    }

    #[test]
    fn rejects_non_finite() {
        let err = WaveBuffer::new(vec![vec![0.0, f64::NAN]], 16_000).unwrap_err();
        assert_eq!(err, DspError::NonFinite { channel: 0, index: 1 });
    }

    #[test]
    fn rejects_zero_rate() {
        assert!(WaveBuffer::mono(vec![1.0], 0).is_err());
    }
}
