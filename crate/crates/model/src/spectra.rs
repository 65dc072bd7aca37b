//! Conversion between complex spectrograms and the real `N × 2P × T × F`
//! tensors the network consumes. Channels hold real parts first, then
//! imaginary parts: `[re_0..re_{P-1}, im_0..im_{P-1}]`.

use eabnet_dsp::{compress, Complex64, ComplexSpectrogram};
use eabnet_tensor::Tensor;

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};

/// Magnitude exponent of the power-law compression.
pub const COMPRESSION_EXPONENT: f64 = 0.5;

/// `1 × 2P × T × F` tensor of a `P`-channel spectrogram.
pub fn spectrogram_to_tensor(spec: &ComplexSpectrogram) -> Tensor {
    let (p, t, f) = (spec.channels(), spec.frames(), spec.bins());
    let mut data = vec![0.0; 2 * p * t * f];
    for fi in 0..f {
        for ti in 0..t {
            for (ch, z) in spec.point(fi, ti).iter().enumerate() {
                data[(ch * t + ti) * f + fi] = z.re;
                data[((p + ch) * t + ti) * f + fi] = z.im;
            }
        }
    }
    Tensor::new(vec![1, 2 * p, t, f], data).expect("consistent shape")
}

/// Spectrogram from item `n` of an `N × 2P × T × F` tensor, framing
/// metadata taken from `like`.
pub fn tensor_to_spectrogram(tensor: &Tensor, n: usize, like: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    let [batch, c2, t, f] = match tensor.shape() {
        &[a, b, c, d] => [a, b, c, d],
        s => return Err(ModelError::Input(format!("expected N×2P×T×F tensor, got {s:?}"))),
    };
    if n >= batch || c2 % 2 != 0 || t != like.frames() || f != like.bins() {
        return Err(ModelError::Input(format!(
            "tensor {:?} item {n} incompatible with {}x{} spectrogram",
            tensor.shape(),
            like.bins(),
            like.frames()
        )));
    }
    let p = c2 / 2;
    let mut out = ComplexSpectrogram::zeros_like(like, p);
    let d = tensor.data();
    let base = n * c2 * t * f;
    for fi in 0..f {
        for ti in 0..t {
            for ch in 0..p {
                let re = d[base + (ch * t + ti) * f + fi];
                let im = d[base + ((p + ch) * t + ti) * f + fi];
                out.set(fi, ti, ch, Complex64::new(re, im));
            }
        }
    }
    Ok(out)
}

/// Network input for a `P`-channel mixture spectrum: shape-checked against
/// `cfg` and compressed when `cfg.compression` is set.
pub fn prepare_input(spec: &ComplexSpectrogram, cfg: &ModelConfig) -> Result<Tensor> {
    if spec.channels() != cfg.mics {
        return Err(ModelError::Input(format!("{} channels, model expects {}", spec.channels(), cfg.mics)));
    }
    if spec.bins() != cfg.freq_bins {
        return Err(ModelError::Input(format!("{} bins, model expects {}", spec.bins(), cfg.freq_bins)));
    }
    if cfg.compression {
        Ok(spectrogram_to_tensor(&compress(spec, COMPRESSION_EXPONENT)?))
    } else {
        Ok(spectrogram_to_tensor(spec))
    }
}

/// Channel-0 slice `N × 2 × T × F` of an `N × 2P × T × F` tensor.
pub fn reference_channel(x: &Tensor) -> Result<Tensor> {
    let [n, c2, t, f] = match x.shape() {
        &[a, b, c, d] if b % 2 == 0 && b > 0 => [a, b, c, d],
        s => return Err(ModelError::Input(format!("expected N×2P×T×F tensor, got {s:?}"))),
    };
    let p = c2 / 2;
    let plane = t * f;
    let mut data = Vec::with_capacity(n * 2 * plane);
    for item in 0..n {
        let base = item * c2 * plane;
        data.extend_from_slice(&x.data()[base..base + plane]);
        data.extend_from_slice(&x.data()[base + p * plane..base + (p + 1) * plane]);
    }
    Ok(Tensor::new(vec![n, 2, t, f], data)?)
}
