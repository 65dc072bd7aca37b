use crate::error::{Result, TrainError};

/// Metrics are clamped to `±SATURATION_DB`.
pub const SATURATION_DB: f64 = 60.0;

fn check(estimate: &[f64], reference: &[f64]) -> Result<()> {
    if estimate.len() != reference.len() {
        return Err(TrainError::Data(format!(
            "estimate has {} samples, reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    if estimate.is_empty() {
        return Err(TrainError::Data("empty signal".into()));
    }
    Ok(())
}

/// `10·log10(num/den)` clamped to the saturation range. A zero denominator
/// saturates high unless the numerator is also zero.
fn ratio_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        return -SATURATION_DB;
    }
    if den <= 0.0 {
        return SATURATION_DB;
    }
    (10.0 * (num / den).log10()).clamp(-SATURATION_DB, SATURATION_DB)
}

fn zero_mean(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scale-invariant SNR in dB. Both signals are made zero-mean, the estimate
/// is projected onto the reference, and the projection energy is compared
/// with the residual energy.
pub fn si_snr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    check(estimate, reference)?;
    let e = zero_mean(estimate);
    let s = zero_mean(reference);
    let ss = dot(&s, &s);
    if ss <= 0.0 {
        return Err(TrainError::Data("reference has no energy".into()));
    }
    let alpha = dot(&e, &s) / ss;
    let (mut target, mut residual) = (0.0, 0.0);
    for (ei, si) in e.iter().zip(&s) {
        let proj = alpha * si;
        target += proj * proj;
        residual += (ei - proj).powi(2);
    }
    Ok(ratio_db(target, residual))
}

/// Plain SNR in dB, `‖s‖² / ‖e − s‖²`, with no scale allowance.
pub fn snr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    check(estimate, reference)?;
    let signal = dot(reference, reference);
    let error: f64 = estimate.iter().zip(reference).map(|(e, s)| (e - s).powi(2)).sum();
    Ok(ratio_db(signal, error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_signals_saturate() {
        let s = [1.0, -2.0, 0.5, 3.0];
        assert_eq!(si_snr(&s, &s).unwrap(), SATURATION_DB);
        assert_eq!(snr(&s, &s).unwrap(), SATURATION_DB);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(si_snr(&[1.0, 2.0], &[1.0]).is_err());
        assert!(snr(&[], &[]).is_err());
    }

    #[test]
    fn silent_reference_is_an_error() {
        assert!(si_snr(&[1.0, 2.0], &[3.0, 3.0]).is_err());
    }
}
