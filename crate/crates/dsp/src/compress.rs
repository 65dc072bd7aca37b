use num_complex::Complex64;

use crate::error::{DspError, Result};
use crate::spectrogram::ComplexSpectrogram;

fn check_exponent(exponent: f64) -> Result<()> {
    if exponent > 0.0 && exponent <= 1.0 {
        Ok(())
    } else {
        Err(DspError::InvalidExponent(exponent))
    }
}

/// `|z|^exponent * e^{j arg z}`; zero maps to zero.
#[inline]
pub fn compress_value(z: Complex64, exponent: f64) -> Complex64 {
    let mag = z.norm();
    if mag == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    // Scaling the unit phasor keeps arg(z) intact instead of a polar round trip.
    z * (mag.powf(exponent) / mag)
}

#[inline]
pub fn decompress_value(z: Complex64, exponent: f64) -> Complex64 {
    compress_value(z, 1.0 / exponent)
}

/// Magnitude power compression, phase untouched.
pub fn compress(spec: &ComplexSpectrogram, exponent: f64) -> Result<ComplexSpectrogram> {
    check_exponent(exponent)?;
    Ok(spec.map(|z| compress_value(z, exponent)))
}

/// Inverse of [`compress`].
pub fn decompress(spec: &ComplexSpectrogram, exponent: f64) -> Result<ComplexSpectrogram> {
    check_exponent(exponent)?;
    Ok(spec.map(|z| decompress_value(z, exponent)))
}
