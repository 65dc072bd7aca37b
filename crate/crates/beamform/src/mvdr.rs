use eabnet_dsp::ComplexSpectrogram;
use num_complex::Complex64;

use crate::covariance::SpatialCovariance;
use crate::error::{BeamformError, Result};
use crate::linalg::{inner, principal_eigenvector, solve, trace, whitened_principal_vector};

/// Relative diagonal loading `δ`: `Φ + δ·tr(Φ)/P·I`.
pub const DIAGONAL_LOADING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteeringNorm {
    /// `‖c‖ = 1`, reference component real positive.
    Unit,
    /// Relative transfer function: reference component exactly 1.
    #[default]
    Reference,
}

/// Per-bin steering vectors, `bins × P`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    data: Vec<Complex64>,
    bins: usize,
    mics: usize,
    pub norm: SteeringNorm,
}

impl SteeringVector {
    pub fn new(data: Vec<Complex64>, bins: usize, mics: usize, norm: SteeringNorm) -> Result<Self> {
        if data.len() != bins * mics {
            return Err(BeamformError::Shape(format!("{} steering values for {bins}x{mics}", data.len())));
        }
        Ok(Self { data, bins, mics, norm })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn mics(&self) -> usize {
        self.mics
    }

    pub fn bin(&self, f: usize) -> &[Complex64] {
        &self.data[f * self.mics..(f + 1) * self.mics]
    }
}

/// Principal eigenvector of each speech covariance, normalised per `norm`.
/// Power iteration with 200 iterations and tolerance 1e-10.
pub fn steering_from_covariance(phi: &SpatialCovariance, norm: SteeringNorm) -> Result<SteeringVector> {
    let p = phi.mics();
    let mut data = Vec::with_capacity(phi.bins() * p);
    for f in 0..phi.bins() {
        let mut v = principal_eigenvector(phi.matrix(f), p).ok_or(BeamformError::DegenerateSteering { bin: f })?;
        if norm == SteeringNorm::Reference {
            let r = v[0].re;
            if !(r > 0.0) {
                return Err(BeamformError::DegenerateSteering { bin: f });
            }
            v.iter_mut().for_each(|x| *x /= r);
        }
        data.extend(v);
    }
    SteeringVector::new(data, phi.bins(), p, norm)
}

pub(crate) fn normalise(mut v: Vec<Complex64>, norm: SteeringNorm) -> Option<Vec<Complex64>> {
    match norm {
        SteeringNorm::Reference => {
            let r = v[0].re;
            if !(r > 0.0) {
                return None;
            }
            v.iter_mut().for_each(|x| *x /= r);
        }
        SteeringNorm::Unit => {
            let n = crate::linalg::norm(&v);
            v.iter_mut().for_each(|x| *x /= n);
        }
    }
    Some(v)
}

/// Loaded copy `Φ + δ·tr(Φ)/P·I`.
pub(crate) fn loaded(phi: &[Complex64], p: usize) -> Vec<Complex64> {
    let mut out = phi.to_vec();
    let load = DIAGONAL_LOADING * trace(phi, p) / p as f64;
    for i in 0..p {
        out[i * p + i] += load;
    }
    out
}

/// Steering for one bin by covariance whitening: the principal eigenvector
/// of `Φn^{-1/2} Φs Φn^{-H/2}` mapped back through `Φn^{1/2}` (Cholesky
/// factor of the loaded noise covariance). Noise leaking into `Φs` shifts
/// the whitened spectrum uniformly and leaves the direction unchanged.
pub fn whitened_steering_bin(speech: &[Complex64], noise: &[Complex64], norm: SteeringNorm) -> Option<Vec<Complex64>> {
    let p = (speech.len() as f64).sqrt() as usize;
    normalise(whitened_principal_vector(speech, &loaded(noise, p), p)?, norm)
}

pub fn steering_whitened(
    speech: &SpatialCovariance,
    noise: &SpatialCovariance,
    norm: SteeringNorm,
) -> Result<SteeringVector> {
    if speech.bins() != noise.bins() || speech.mics() != noise.mics() {
        return Err(BeamformError::Shape("speech and noise covariances differ in shape".into()));
    }
    let p = speech.mics();
    let mut data = Vec::with_capacity(speech.bins() * p);
    for f in 0..speech.bins() {
        let v = whitened_steering_bin(speech.matrix(f), noise.matrix(f), norm)
            .ok_or(BeamformError::DegenerateSteering { bin: f })?;
        data.extend(v);
    }
    SteeringVector::new(data, speech.bins(), p, norm)
}

/// Time-invariant per-bin weights, `bins × P`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerWeights {
    data: Vec<Complex64>,
    bins: usize,
    mics: usize,
}

impl BeamformerWeights {
    pub fn new(data: Vec<Complex64>, bins: usize, mics: usize) -> Result<Self> {
        if data.len() != bins * mics {
            return Err(BeamformError::Shape(format!("{} weights for {bins}x{mics}", data.len())));
        }
        Ok(Self { data, bins, mics })
    }

    /// Selects microphone `reference` in every bin.
    pub fn selector(bins: usize, mics: usize, reference: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); bins * mics];
        for f in 0..bins {
            data[f * mics + reference] = Complex64::new(1.0, 0.0);
        }
        Self { data, bins, mics }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn mics(&self) -> usize {
        self.mics
    }

    pub fn bin(&self, f: usize) -> &[Complex64] {
        &self.data[f * self.mics..(f + 1) * self.mics]
    }

    pub fn bin_mut(&mut self, f: usize) -> &mut [Complex64] {
        &mut self.data[f * self.mics..(f + 1) * self.mics]
    }
}

/// Weights of the minimum-variance distortionless beamformer for one bin:
/// `w = Φ⁻¹c / (c^H Φ⁻¹ c)` with `Φ` diagonally loaded. `None` if singular.
pub fn mvdr_bin(phi: &[Complex64], c: &[Complex64]) -> Option<Vec<Complex64>> {
    let y = solve(&loaded(phi, c.len()), c)?;
    let denom = inner(c, &y);
    if !(denom.norm() > 0.0) || !denom.re.is_finite() {
        return None;
    }
    let w: Vec<Complex64> = y.iter().map(|v| v / denom.conj()).collect();
    w.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(w)
}

pub fn mvdr_weights(noise: &SpatialCovariance, steering: &SteeringVector) -> Result<BeamformerWeights> {
    if noise.bins() != steering.bins() || noise.mics() != steering.mics() {
        return Err(BeamformError::Shape(format!(
            "noise covariance {}x{} vs steering {}x{}",
            noise.bins(),
            noise.mics(),
            steering.bins(),
            steering.mics()
        )));
    }
    let mut data = Vec::with_capacity(noise.bins() * noise.mics());
    for f in 0..noise.bins() {
        data.extend(mvdr_bin(noise.matrix(f), steering.bin(f)).ok_or(BeamformError::Singular { bin: f })?);
    }
    BeamformerWeights::new(data, noise.bins(), noise.mics())
}

/// `Y_{f,t} = w_f^H X_{f,t}`, accumulated over microphones in index order.
pub fn apply_utterance_beamformer(w: &BeamformerWeights, x: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    if w.bins() != x.bins() || w.mics() != x.channels() {
        return Err(BeamformError::Shape(format!(
            "weights {}x{} vs spectrogram {} bins x {} channels",
            w.bins(),
            w.mics(),
            x.bins(),
            x.channels()
        )));
    }
    let mut out = ComplexSpectrogram::zeros_like(x, 1);
    for f in 0..x.bins() {
        let wf = w.bin(f);
        for t in 0..x.frames() {
            let v = x.point(f, t);
            let (mut re, mut im) = (0.0, 0.0);
            for (wp, xp) in wf.iter().zip(v) {
                let (wr, wi) = (wp.re, -wp.im);
                re += wr * xp.re - wi * xp.im;
                im += wr * xp.im + wi * xp.re;
            }
            out.set(f, t, 0, Complex64::new(re, im));
        }
    }
    Ok(out)
}
