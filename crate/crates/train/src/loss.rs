use eabnet_dsp::ComplexSpectrogram;
use eabnet_tensor::{ops, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

/// Weights of the complex (RI) and magnitude terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub ri: f64,
    pub mag: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { ri: 0.5, mag: 0.5 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.ri >= 0.0 && self.mag >= 0.0 && self.ri + self.mag > 0.0) {
            return Err(TrainError::Config(format!("loss weights {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub ri_term: f64,
    pub mag_term: f64,
}

impl LossReport {
    pub fn new(ri_term: f64, mag_term: f64, weights: LossWeights) -> Self {
        Self { total: weights.ri * ri_term + weights.mag * mag_term, ri_term, mag_term }
    }
}

/// Loss between two single-channel spectra, averaged over all `(f, t)`.
pub fn loss_report(estimate: &ComplexSpectrogram, target: &ComplexSpectrogram, weights: LossWeights) -> Result<LossReport> {
    if estimate.channels() != 1 || target.channels() != 1 {
        return Err(TrainError::Data("loss expects single-channel spectra".into()));
    }
    if estimate.bins() != target.bins() || estimate.frames() != target.frames() {
        return Err(TrainError::Data(format!(
            "estimate {}×{} vs target {}×{}",
            estimate.bins(),
            estimate.frames(),
            target.bins(),
            target.frames()
        )));
    }
    let points = estimate.data().len();
    if points == 0 {
        return Err(TrainError::Data("empty spectrogram".into()));
    }
    let (mut ri, mut mag) = (0.0, 0.0);
    for (e, s) in estimate.data().iter().zip(target.data()) {
        ri += (e - s).norm_sqr();
        mag += (e.norm() - s.norm()).powi(2);
    }
    Ok(LossReport::new(ri / points as f64, mag / points as f64, weights))
}

/// Differentiable loss on `N × 2 × T × F` tensors, averaged over `(n, t, f)`.
pub fn loss_var(estimate: &Var, target: &Var, weights: LossWeights) -> Result<(Var, LossReport)> {
    let (var, terms) = ops::spectral_loss(estimate, target, weights.ri, weights.mag)?;
    Ok((var, LossReport { total: terms.total, ri_term: terms.ri, mag_term: terms.mag }))
}
