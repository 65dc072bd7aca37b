use eabnet_dsp::ComplexSpectrogram;
use num_complex::Complex64;

use crate::covariance::{spatial_covariance, SpatialCovariance};
use crate::error::{BeamformError, Result};
use crate::linalg::principal_eigenvector;
use crate::mask::{irm, TfMask};
use crate::mvdr::{apply_utterance_beamformer, mvdr_bin, normalise, whitened_steering_bin, BeamformerWeights, SteeringNorm};

/// Result of the oracle-mask MVDR baseline.
#[derive(Debug, Clone)]
pub struct OracleMvdr {
    pub mask: TfMask,
    pub weights: BeamformerWeights,
    pub output: ComplexSpectrogram,
    /// Bins where speech or noise statistics were degenerate and the
    /// reference microphone was passed through instead.
    pub fallback_bins: Vec<usize>,
}

/// How the oracle pipeline extracts the steering vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteeringMethod {
    /// Principal eigenvector of the mask-weighted speech covariance.
    Principal,
    /// Principal eigenvector after whitening by the noise covariance.
    #[default]
    Whitened,
}

/// Oracle MB-MVDR: IRM from the reference-channel speech and noise images,
/// speech covariance weighted by the IRM, noise covariance by its
/// complement, covariance-whitened steering, MVDR weights, then
/// utterance-level filter-and-sum of the mixture.
pub fn oracle_mvdr(
    mixture: &ComplexSpectrogram,
    speech: &ComplexSpectrogram,
    noise: &ComplexSpectrogram,
    norm: SteeringNorm,
) -> Result<OracleMvdr> {
    oracle_mvdr_with(mixture, speech, noise, norm, SteeringMethod::default())
}

pub fn oracle_mvdr_with(
    mixture: &ComplexSpectrogram,
    speech: &ComplexSpectrogram,
    noise: &ComplexSpectrogram,
    norm: SteeringNorm,
    method: SteeringMethod,
) -> Result<OracleMvdr> {
    if mixture.bins() != speech.bins() || mixture.frames() != speech.frames() {
        return Err(BeamformError::Shape("mixture and speech spectrograms differ".into()));
    }
    let mask = irm(speech, noise)?;
    let phi_s: SpatialCovariance = spatial_covariance(mixture, &mask)?;
    let phi_n = spatial_covariance(mixture, &mask.complement())?;
    let p = mixture.channels();
    let mut weights = BeamformerWeights::selector(mixture.bins(), p, 0);
    let mut fallback_bins = Vec::new();
    for f in 0..mixture.bins() {
        let steering = match method {
            SteeringMethod::Principal => {
                principal_eigenvector(phi_s.matrix(f), p).and_then(|v| normalise(v, norm))
            }
            SteeringMethod::Whitened => whitened_steering_bin(phi_s.matrix(f), phi_n.matrix(f), norm),
        };
        match steering.and_then(|c| mvdr_bin(phi_n.matrix(f), &c)) {
            Some(w) => weights.bin_mut(f).copy_from_slice(&w),
            None => {
                let bin = weights.bin_mut(f);
                bin.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                bin[0] = Complex64::new(1.0, 0.0);
                fallback_bins.push(f);
            }
        }
    }
    let output = apply_utterance_beamformer(&weights, mixture)?;
    Ok(OracleMvdr { mask, weights, output, fallback_bins })
}
