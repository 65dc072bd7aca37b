use std::ops::Range;

use crate::error::{shape_err, Result, TensorError};
use crate::graph::{Backward, Var};
use crate::tensor::Tensor;

/// Geometry of a 2-D convolution over `N × C × T × F` inputs.
///
/// With `causal` set, `(kt-1)*dilation_time` zero frames are padded on the
/// past side only, so output frame `t` depends on input frames `≤ t`.
/// Otherwise no time padding is applied ("valid" in time).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub dilation_time: usize,
    pub causal: bool,
    /// Zero padding (low side, high side) on the frequency axis.
    pub freq_pad: (usize, usize),
}

impl Conv2dSpec {
    pub fn new(kernel: (usize, usize), stride: (usize, usize)) -> Self {
        Self { kernel, stride, dilation_time: 1, causal: true, freq_pad: (0, 0) }
    }

    pub fn with_freq_pad(mut self, low: usize, high: usize) -> Self {
        self.freq_pad = (low, high);
        self
    }

    pub fn with_dilation(mut self, dilation: usize) -> Self {
        self.dilation_time = dilation;
        self
    }

    pub fn non_causal(mut self) -> Self {
        self.causal = false;
        self
    }

    fn time_pad(&self) -> usize {
        if self.causal {
            (self.kernel.0 - 1) * self.dilation_time
        } else {
            0
        }
    }

    fn validate(&self) -> Result<()> {
        let (kt, kf) = self.kernel;
        if kt == 0 || kf == 0 || self.stride.0 == 0 || self.stride.1 == 0 || self.dilation_time == 0 {
            return Err(TensorError::Config(format!("degenerate convolution geometry {self:?}")));
        }
        Ok(())
    }
}

/// Output `(frames, bins)` of a convolution with `spec` on a `frames × bins`
/// input.
pub fn conv2d_output_size(spec: &Conv2dSpec, frames: usize, bins: usize) -> Result<(usize, usize)> {
    spec.validate()?;
    let (kt, kf) = spec.kernel;
    let span_t = (kt - 1) * spec.dilation_time + 1;
    let padded_t = frames + spec.time_pad();
    let padded_f = bins + spec.freq_pad.0 + spec.freq_pad.1;
    if padded_t < span_t || padded_f < kf {
        return Err(shape_err(
            "conv2d",
            format!("input {frames}x{bins} too small for kernel {kt}x{kf}"),
        ));
    }
    Ok(((padded_t - span_t) / spec.stride.0 + 1, (padded_f - kf) / spec.stride.1 + 1))
}

/// Geometry of a transposed convolution. The frequency axis is upsampled
/// to exactly `out_width` bins; `freq_pad` names the padding of the forward
/// convolution this layer mirrors. With `causal`, future-side time taps are
/// trimmed (output frame `t` sees input frames `t-(kt-1)d ..= t`); without
/// it the layer is the exact adjoint of the causal forward convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deconv2dSpec {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub dilation_time: usize,
    pub causal: bool,
    pub freq_pad: (usize, usize),
    pub out_width: usize,
}

impl Deconv2dSpec {
    pub fn new(kernel: (usize, usize), stride: (usize, usize), out_width: usize) -> Self {
        Self { kernel, stride, dilation_time: 1, causal: true, freq_pad: (0, 0), out_width }
    }

    pub fn with_freq_pad(mut self, low: usize, high: usize) -> Self {
        self.freq_pad = (low, high);
        self
    }

    pub fn non_causal(mut self) -> Self {
        self.causal = false;
        self
    }

    fn mirrored(&self) -> Conv2dSpec {
        Conv2dSpec {
            kernel: self.kernel,
            stride: self.stride,
            dilation_time: self.dilation_time,
            causal: true,
            freq_pad: self.freq_pad,
        }
    }

    fn time_offset(&self) -> usize {
        if self.causal {
            0
        } else {
            (self.kernel.0 - 1) * self.dilation_time
        }
    }
}

/// Indices `k < count` with `k*stride + tap - pad` inside `[0, limit)`.
fn tap_range(count: usize, stride: usize, tap: usize, pad: usize, limit: usize) -> Range<usize> {
    let lo = if pad > tap { (pad - tap).div_ceil(stride) } else { 0 };
    if limit + pad <= tap {
        return 0..0;
    }
    let hi = ((limit - 1 + pad - tap) / stride + 1).min(count);
    lo..hi.max(lo)
}

struct Dims {
    n: usize,
    ci: usize,
    t: usize,
    f: usize,
    co: usize,
    to: usize,
    fo: usize,
}

fn check_4d(op: &'static str, v: &Var) -> Result<[usize; 4]> {
    match v.shape() {
        &[a, b, c, d] => Ok([a, b, c, d]),
        s => Err(shape_err(op, format!("expected N×C×T×F, got {s:?}"))),
    }
}

fn check_bias(op: &'static str, bias: Option<&Var>, co: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.value().numel() != co {
            return Err(shape_err(op, format!("bias {:?} for {co} output channels", b.shape())));
        }
    }
    Ok(())
}

struct Conv2dOp {
    input: Var,
    weight: Var,
    bias: Option<Var>,
    spec: Conv2dSpec,
    dims: Dims,
}

/// Causal-capable 2-D convolution. Weight layout `Co × Ci × kt × kf`,
/// optional bias of length `Co`.
pub fn conv2d(input: &Var, weight: &Var, bias: Option<&Var>, spec: Conv2dSpec) -> Result<Var> {
    let [n, ci, t, f] = check_4d("conv2d", input)?;
    let (kt, kf) = spec.kernel;
    let co = match weight.shape() {
        &[co, wci, wkt, wkf] if wci == ci && wkt == kt && wkf == kf => co,
        s => {
            return Err(shape_err(
                "conv2d",
                format!("weight {s:?} incompatible with {ci} input channels and kernel {kt}x{kf}"),
            ))
        }
    };
    check_bias("conv2d", bias, co)?;
    let (to, fo) = conv2d_output_size(&spec, t, f)?;
    let dims = Dims { n, ci, t, f, co, to, fo };

    let x = input.data();
    let w = weight.data();
    let (st, sf) = spec.stride;
    let dil = spec.dilation_time;
    let pad_t = spec.time_pad();
    let pl = spec.freq_pad.0;
    let ranges: Vec<Range<usize>> = (0..kf).map(|b| tap_range(fo, sf, b, pl, f)).collect();

    let mut out = vec![0.0; n * co * to * fo];
    for bn in 0..n {
        for oc in 0..co {
            let oplane = &mut out[(bn * co + oc) * to * fo..][..to * fo];
            if let Some(b) = bias {
                oplane.iter_mut().for_each(|v| *v = b.data()[oc]);
            }
            for ic in 0..ci {
                let iplane = &x[(bn * ci + ic) * t * f..][..t * f];
                for a in 0..kt {
                    let wbase = ((oc * ci + ic) * kt + a) * kf;
                    for ot in 0..to {
                        let ti = ot * st + a * dil;
                        if ti < pad_t || ti - pad_t >= t {
                            continue;
                        }
                        let irow = &iplane[(ti - pad_t) * f..][..f];
                        let orow = &mut oplane[ot * fo..][..fo];
                        for (b, range) in ranges.iter().enumerate() {
                            let wv = w[wbase + b];
                            for of in range.clone() {
                                orow[of] += wv * irow[of * sf + b - pl];
                            }
                        }
                    }
                }
            }
        }
    }
    let value = Tensor::new([n, co, to, fo], out)?;
    Ok(Var::from_op(
        value,
        Conv2dOp { input: input.clone(), weight: weight.clone(), bias: bias.cloned(), spec, dims },
    ))
}

impl Backward for Conv2dOp {
    fn inputs(&self) -> Vec<&Var> {
        let mut v = vec![&self.input, &self.weight];
        if let Some(b) = &self.bias {
            v.push(b);
        }
        v
    }

    fn backward(&self, _out: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let Dims { n, ci, t, f, co, to, fo } = self.dims;
        let (kt, kf) = self.spec.kernel;
        let (st, sf) = self.spec.stride;
        let dil = self.spec.dilation_time;
        let pad_t = self.spec.time_pad();
        let pl = self.spec.freq_pad.0;
        let x = self.input.data();
        let w = self.weight.data();
        let want_x = self.input.requires_grad();
        let mut gx = vec![0.0; if want_x { x.len() } else { 0 }];
        let mut gw = vec![0.0; w.len()];
        let mut gb = vec![0.0; co];
        let ranges: Vec<Range<usize>> = (0..kf).map(|b| tap_range(fo, sf, b, pl, f)).collect();

        for bn in 0..n {
            for oc in 0..co {
                let gplane = &gy[(bn * co + oc) * to * fo..][..to * fo];
                gb[oc] += gplane.iter().sum::<f64>();
                for ic in 0..ci {
                    let ibase = (bn * ci + ic) * t * f;
                    for a in 0..kt {
                        let wbase = ((oc * ci + ic) * kt + a) * kf;
                        for ot in 0..to {
                            let ti = ot * st + a * dil;
                            if ti < pad_t || ti - pad_t >= t {
                                continue;
                            }
                            let roff = ibase + (ti - pad_t) * f;
                            let grow = &gplane[ot * fo..][..fo];
                            for (b, range) in ranges.iter().enumerate() {
                                let mut acc = 0.0;
                                for of in range.clone() {
                                    acc += grow[of] * x[roff + of * sf + b - pl];
                                }
                                gw[wbase + b] += acc;
                                if want_x {
                                    let wv = w[wbase + b];
                                    for of in range.clone() {
                                        gx[roff + of * sf + b - pl] += wv * grow[of];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut grads = vec![want_x.then_some(gx), Some(gw)];
        if self.bias.is_some() {
            grads.push(Some(gb));
        }
        grads
    }
}

struct Deconv2dOp {
    input: Var,
    weight: Var,
    bias: Option<Var>,
    spec: Deconv2dSpec,
    dims: Dims,
}

/// Transposed 2-D convolution. Weight layout `Ci × Co × kt × kf` (the
/// layout of the forward convolution it transposes). Time stride must be 1.
pub fn deconv2d(input: &Var, weight: &Var, bias: Option<&Var>, spec: Deconv2dSpec) -> Result<Var> {
    let [n, ci, t, f] = check_4d("deconv2d", input)?;
    let (kt, kf) = spec.kernel;
    if spec.stride.0 != 1 {
        return Err(TensorError::Config("deconv2d supports time stride 1 only".into()));
    }
    let co = match weight.shape() {
        &[wci, co, wkt, wkf] if wci == ci && wkt == kt && wkf == kf => co,
        s => {
            return Err(shape_err(
                "deconv2d",
                format!("weight {s:?} incompatible with {ci} input channels and kernel {kt}x{kf}"),
            ))
        }
    };
    check_bias("deconv2d", bias, co)?;
    let mirror = spec.mirrored();
    mirror.validate()?;
    let reachable = conv2d_output_size(&mirror, 1 + (kt - 1) * spec.dilation_time, spec.out_width)
        .map(|(_, w)| w == f)
        .unwrap_or(false);
    if !reachable {
        return Err(TensorError::Config(format!(
            "deconv2d: width {} unreachable from {f} bins with kernel {kf}, stride {}, padding {:?}",
            spec.out_width, spec.stride.1, spec.freq_pad
        )));
    }
    let (to, fo) = (t, spec.out_width);
    let dims = Dims { n, ci, t, f, co, to, fo };

    let x = input.data();
    let w = weight.data();
    let sf = spec.stride.1;
    let dil = spec.dilation_time;
    let toff = spec.time_offset();
    let pl = spec.freq_pad.0;
    let ranges: Vec<Range<usize>> = (0..kf).map(|b| tap_range(f, sf, b, pl, fo)).collect();

    let mut out = vec![0.0; n * co * to * fo];
    for bn in 0..n {
        for oc in 0..co {
            let oplane = &mut out[(bn * co + oc) * to * fo..][..to * fo];
            if let Some(b) = bias {
                oplane.iter_mut().for_each(|v| *v = b.data()[oc]);
            }
            for ic in 0..ci {
                let iplane = &x[(bn * ci + ic) * t * f..][..t * f];
                for a in 0..kt {
                    let wbase = ((ic * co + oc) * kt + a) * kf;
                    for ti in 0..t {
                        let tt = ti + a * dil;
                        if tt < toff || tt - toff >= to {
                            continue;
                        }
                        let irow = &iplane[ti * f..][..f];
                        let orow = &mut oplane[(tt - toff) * fo..][..fo];
                        for (b, range) in ranges.iter().enumerate() {
                            let wv = w[wbase + b];
                            for fi in range.clone() {
                                orow[fi * sf + b - pl] += wv * irow[fi];
                            }
                        }
                    }
                }
            }
        }
    }
    let value = Tensor::new([n, co, to, fo], out)?;
    Ok(Var::from_op(
        value,
        Deconv2dOp { input: input.clone(), weight: weight.clone(), bias: bias.cloned(), spec, dims },
    ))
}

impl Backward for Deconv2dOp {
    fn inputs(&self) -> Vec<&Var> {
        let mut v = vec![&self.input, &self.weight];
        if let Some(b) = &self.bias {
            v.push(b);
        }
        v
    }

    fn backward(&self, _out: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let Dims { n, ci, t, f, co, to, fo } = self.dims;
        let (kt, kf) = self.spec.kernel;
        let sf = self.spec.stride.1;
        let dil = self.spec.dilation_time;
        let toff = self.spec.time_offset();
        let pl = self.spec.freq_pad.0;
        let x = self.input.data();
        let w = self.weight.data();
        let want_x = self.input.requires_grad();
        let mut gx = vec![0.0; if want_x { x.len() } else { 0 }];
        let mut gw = vec![0.0; w.len()];
        let mut gb = vec![0.0; co];
        let ranges: Vec<Range<usize>> = (0..kf).map(|b| tap_range(f, sf, b, pl, fo)).collect();

        for bn in 0..n {
            for oc in 0..co {
                let gplane = &gy[(bn * co + oc) * to * fo..][..to * fo];
                gb[oc] += gplane.iter().sum::<f64>();
                for ic in 0..ci {
                    let ibase = (bn * ci + ic) * t * f;
                    for a in 0..kt {
                        let wbase = ((ic * co + oc) * kt + a) * kf;
                        for ti in 0..t {
                            let tt = ti + a * dil;
                            if tt < toff || tt - toff >= to {
                                continue;
                            }
                            let grow = &gplane[(tt - toff) * fo..][..fo];
                            let roff = ibase + ti * f;
                            for (b, range) in ranges.iter().enumerate() {
                                let mut acc = 0.0;
                                for fi in range.clone() {
                                    acc += grow[fi * sf + b - pl] * x[roff + fi];
                                }
                                gw[wbase + b] += acc;
                                if want_x {
                                    let wv = w[wbase + b];
                                    for fi in range.clone() {
                                        gx[roff + fi] += wv * grow[fi * sf + b - pl];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut grads = vec![want_x.then_some(gx), Some(gw)];
        if self.bias.is_some() {
            grads.push(Some(gb));
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tap_range_bounds() {
        // fo*2 + b - 1 in [0, 5) for fo < 3
        assert_eq!(tap_range(3, 2, 0, 1, 5), 1..3);
        assert_eq!(tap_range(3, 2, 1, 1, 5), 0..3);
        assert_eq!(tap_range(3, 2, 2, 1, 5), 0..2);
    }

    #[test]
    fn default_width_chain() {
        let spec = Conv2dSpec::new((2, 3), (1, 2)).with_freq_pad(1, 0);
        let mut w = 161;
        let mut chain = vec![w];
        for _ in 0..5 {
            w = conv2d_output_size(&spec, 10, w).unwrap().1;
            chain.push(w);
        }
        assert_eq!(chain, vec![161, 80, 40, 20, 10, 5]);
    }

    #[test]
    fn unreachable_width_is_config_error() {
        let x = Var::constant(Tensor::zeros([1, 1, 2, 5]));
        let w = Var::constant(Tensor::zeros([1, 1, 2, 3]));
        let spec = Deconv2dSpec::new((2, 3), (1, 2), 40).with_freq_pad(1, 0);
        assert!(matches!(deconv2d(&x, &w, None, spec), Err(TensorError::Config(_))));
    }

    #[test]
    fn weight_shape_mismatch_names_op() {
        let x = Var::constant(Tensor::zeros([1, 2, 4, 4]));
        let w = Var::constant(Tensor::zeros([3, 1, 1, 1]));
        let err = conv2d(&x, &w, None, Conv2dSpec::new((1, 1), (1, 1))).unwrap_err();
        assert!(err.to_string().starts_with("conv2d"));
    }
}
