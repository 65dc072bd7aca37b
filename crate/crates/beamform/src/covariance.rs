use eabnet_dsp::ComplexSpectrogram;
use num_complex::Complex64;

use crate::error::{BeamformError, Result};
use crate::mask::TfMask;

/// Floor on the mask sum in the covariance normaliser.
pub const COVARIANCE_FLOOR: f64 = 1e-8;

/// One `P × P` Hermitian matrix per frequency bin, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCovariance {
    data: Vec<Complex64>,
    bins: usize,
    mics: usize,
}

impl SpatialCovariance {
    pub fn new(data: Vec<Complex64>, bins: usize, mics: usize) -> Result<Self> {
        if data.len() != bins * mics * mics {
            return Err(BeamformError::Shape(format!("{} values for {bins} bins of {mics}x{mics}", data.len())));
        }
        Ok(Self { data, bins, mics })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn mics(&self) -> usize {
        self.mics
    }

    pub fn matrix(&self, f: usize) -> &[Complex64] {
        let n = self.mics * self.mics;
        &self.data[f * n..(f + 1) * n]
    }

    pub fn matrix_mut(&mut self, f: usize) -> &mut [Complex64] {
        let n = self.mics * self.mics;
        &mut self.data[f * n..(f + 1) * n]
    }

    /// Largest `|Φ - Φ^H|` entry over all bins.
    pub fn hermitian_error(&self) -> f64 {
        let p = self.mics;
        let mut worst: f64 = 0.0;
        for f in 0..self.bins {
            let m = self.matrix(f);
            for r in 0..p {
                for c in 0..p {
                    worst = worst.max((m[r * p + c] - m[c * p + r].conj()).norm());
                }
            }
        }
        worst
    }

    pub fn scaled(&self, factor: f64) -> SpatialCovariance {
        SpatialCovariance { data: self.data.iter().map(|v| v * factor).collect(), bins: self.bins, mics: self.mics }
    }
}

/// `Φ_f = Σ_t m_{f,t} X_{f,t} X_{f,t}^H / max(Σ_t m_{f,t}, 1e-8)`.
pub fn spatial_covariance(x: &ComplexSpectrogram, mask: &TfMask) -> Result<SpatialCovariance> {
    if mask.bins() != x.bins() || mask.frames() != x.frames() {
        return Err(BeamformError::Shape(format!(
            "mask {}x{} vs spectrogram {}x{}",
            mask.bins(),
            mask.frames(),
            x.bins(),
            x.frames()
        )));
    }
    let p = x.channels();
    let mut data = vec![Complex64::new(0.0, 0.0); x.bins() * p * p];
    for f in 0..x.bins() {
        let phi = &mut data[f * p * p..(f + 1) * p * p];
        let mut weight = 0.0;
        for t in 0..x.frames() {
            let m = mask.get(f, t);
            weight += m;
            if m == 0.0 {
                continue;
            }
            let v = x.point(f, t);
            for r in 0..p {
                let vr = v[r] * m;
                for c in 0..p {
                    phi[r * p + c] += vr * v[c].conj();
                }
            }
        }
        let norm = 1.0 / weight.max(COVARIANCE_FLOOR);
        phi.iter_mut().for_each(|v| *v *= norm);
    }
    SpatialCovariance::new(data, x.bins(), p)
}
