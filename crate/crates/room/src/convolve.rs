use num_complex::Complex64;
use rustfft::FftPlanner;

/// Linear convolution of `signal` with `kernel`, truncated to `out_len`
/// samples.
pub fn fft_convolve(signal: &[f64], kernel: &[f64], out_len: usize) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return vec![0.0; out_len];
    }
    let full = signal.len() + kernel.len() - 1;
    // Short kernels are cheaper directly and exact.
    if kernel.len() <= 32 || signal.len() <= 32 {
        let mut out = vec![0.0; out_len];
        for (i, o) in out.iter_mut().enumerate().take(full) {
            let lo = i.saturating_sub(signal.len() - 1);
            let hi = i.min(kernel.len() - 1);
            *o = (lo..=hi).map(|k| kernel[k] * signal[i - k]).sum();
        }
        return out;
    }
    let n = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    a.resize(n, Complex64::new(0.0, 0.0));
    let mut b: Vec<Complex64> = kernel.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    b.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    (0..out_len).map(|i| if i < full { a[i].re * scale } else { 0.0 }).collect()
}
