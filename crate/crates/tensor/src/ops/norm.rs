use crate::error::{shape_err, Result};
use crate::graph::{Backward, Var};
use crate::tensor::Tensor;

fn check_affine(op: &'static str, gamma: &Var, beta: &Var, n: usize) -> Result<()> {
    if gamma.value().numel() != n || beta.value().numel() != n {
        return Err(shape_err(
            op,
            format!("affine params {:?}/{:?}, expected {n}", gamma.shape(), beta.shape()),
        ));
    }
    Ok(())
}

/// Backward of `y = γ·x̂ + β` with `x̂ = (x-μ)·inv` over one group whose
/// mean and variance are taken over the whole group.
fn group_norm_backward(dxhat: &[f64], xhat: &[f64], inv: f64, gx: &mut [f64]) {
    let m = dxhat.len() as f64;
    let sum_d: f64 = dxhat.iter().sum();
    let sum_dx: f64 = dxhat.iter().zip(xhat).map(|(d, x)| d * x).sum();
    for ((g, d), x) in gx.iter_mut().zip(dxhat).zip(xhat) {
        *g = inv / m * (m * d - sum_d - x * sum_dx);
    }
}

struct InstanceNormOp {
    input: Var,
    gamma: Var,
    beta: Var,
    inv: Vec<f64>,
    xhat: Vec<f64>,
    channels: usize,
    group: usize,
}

/// Instance normalisation: per `(n, c)` statistics over all remaining axes
/// (`T × F` for image tensors), then per-channel affine.
pub fn instance_norm(input: &Var, gamma: &Var, beta: &Var, eps: f64) -> Result<Var> {
    let shape = input.shape();
    if shape.len() < 3 {
        return Err(shape_err("instance_norm", format!("rank ≥ 3 required, got {shape:?}")));
    }
    let channels = shape[1];
    check_affine("instance_norm", gamma, beta, channels)?;
    let group: usize = shape[2..].iter().product();
    let x = input.data();
    let (g, b) = (gamma.data(), beta.data());
    let mut xhat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    let mut inv = Vec::with_capacity(x.len() / group);
    for (gi, chunk) in x.chunks(group).enumerate() {
        let c = gi % channels;
        let mean = chunk.iter().sum::<f64>() / group as f64;
        let var = chunk.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / group as f64;
        let iv = 1.0 / (var + eps).sqrt();
        inv.push(iv);
        for (k, v) in chunk.iter().enumerate() {
            let i = gi * group + k;
            xhat[i] = (v - mean) * iv;
            out[i] = g[c] * xhat[i] + b[c];
        }
    }
    let value = Tensor::new(shape.to_vec(), out)?;
    Ok(Var::from_op(
        value,
        InstanceNormOp {
            input: input.clone(),
            gamma: gamma.clone(),
            beta: beta.clone(),
            inv,
            xhat,
            channels,
            group,
        },
    ))
}

impl Backward for InstanceNormOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.input, &self.gamma, &self.beta]
    }
    fn backward(&self, _out: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let g = self.gamma.data();
        let mut gx = vec![0.0; gy.len()];
        let mut gg = vec![0.0; self.channels];
        let mut gb = vec![0.0; self.channels];
        let mut dxhat = vec![0.0; self.group];
        for (gi, (gchunk, xchunk)) in
            gy.chunks(self.group).zip(self.xhat.chunks(self.group)).enumerate()
        {
            let c = gi % self.channels;
            for ((d, gyv), xh) in dxhat.iter_mut().zip(gchunk).zip(xchunk) {
                *d = gyv * g[c];
                gg[c] += gyv * xh;
                gb[c] += gyv;
            }
            let start = gi * self.group;
            group_norm_backward(&dxhat, xchunk, self.inv[gi], &mut gx[start..start + self.group]);
        }
        vec![Some(gx), Some(gg), Some(gb)]
    }
}

/// Which elements share statistics in [`cumulative_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CumulativeMode {
    /// One running statistic per `(n, c)` over frequency (instance-norm style).
    PerChannel,
    /// One running statistic per `n` over channels and frequency
    /// (cumulative layer-norm style).
    AllChannels,
}

struct CumulativeNormOp {
    input: Var,
    gamma: Var,
    beta: Var,
    mode: CumulativeMode,
    dims: [usize; 4],
    mean: Vec<f64>,
    inv: Vec<f64>,
}

impl CumulativeNormOp {
    fn groups(&self) -> usize {
        match self.mode {
            CumulativeMode::PerChannel => self.dims[0] * self.dims[1],
            CumulativeMode::AllChannels => self.dims[0],
        }
    }
}

/// Frame segments (start offset, channel) of group `g` at frame `t`; each
/// segment is `F` contiguous values.
fn segments(mode: CumulativeMode, dims: [usize; 4], g: usize, t: usize, out: &mut Vec<(usize, usize)>) {
    let [_, c, tt, f] = dims;
    out.clear();
    match mode {
        CumulativeMode::PerChannel => out.push(((g * tt + t) * f, g % c)),
        CumulativeMode::AllChannels => {
            for ch in 0..c {
                out.push((((g * c + ch) * tt + t) * f, ch));
            }
        }
    }
}

/// Causal normalisation: statistics at frame `t` are accumulated over
/// frames `0..=t` only, so no output depends on future frames. Input is
/// `N × C × T × F`; affine parameters are per channel.
pub fn cumulative_norm(
    input: &Var,
    gamma: &Var,
    beta: &Var,
    eps: f64,
    mode: CumulativeMode,
) -> Result<Var> {
    let dims = match input.shape() {
        &[a, b, c, d] => [a, b, c, d],
        s => return Err(shape_err("cumulative_norm", format!("expected N×C×T×F, got {s:?}"))),
    };
    let [_, channels, frames, bins] = dims;
    check_affine("cumulative_norm", gamma, beta, channels)?;
    let x = input.data();
    let (gm, bt) = (gamma.data(), beta.data());
    let groups = match mode {
        CumulativeMode::PerChannel => dims[0] * channels,
        CumulativeMode::AllChannels => dims[0],
    };
    let per_frame = match mode {
        CumulativeMode::PerChannel => bins,
        CumulativeMode::AllChannels => bins * channels,
    };
    let mut out = vec![0.0; x.len()];
    let mut mean = vec![0.0; groups * frames];
    let mut inv = vec![0.0; groups * frames];
    let mut segs = Vec::new();
    for g in 0..groups {
        let (mut s1, mut s2) = (0.0, 0.0);
        for t in 0..frames {
            segments(mode, dims, g, t, &mut segs);
            for &(start, _) in &segs {
                for v in &x[start..start + bins] {
                    s1 += v;
                    s2 += v * v;
                }
            }
            let count = ((t + 1) * per_frame) as f64;
            let mu = s1 / count;
            let var = (s2 / count - mu * mu).max(0.0);
            let iv = 1.0 / (var + eps).sqrt();
            mean[g * frames + t] = mu;
            inv[g * frames + t] = iv;
            for &(start, ch) in &segs {
                for i in start..start + bins {
                    out[i] = gm[ch] * (x[i] - mu) * iv + bt[ch];
                }
            }
        }
    }
    let value = Tensor::new(dims.to_vec(), out)?;
    Ok(Var::from_op(
        value,
        CumulativeNormOp {
            input: input.clone(),
            gamma: gamma.clone(),
            beta: beta.clone(),
            mode,
            dims,
            mean,
            inv,
        },
    ))
}

impl Backward for CumulativeNormOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.input, &self.gamma, &self.beta]
    }

    fn backward(&self, _out: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let [_, channels, frames, bins] = self.dims;
        let per_frame = match self.mode {
            CumulativeMode::PerChannel => bins,
            CumulativeMode::AllChannels => bins * channels,
        };
        let x = self.input.data();
        let gm = self.gamma.data();
        let mut gx = vec![0.0; x.len()];
        let mut gg = vec![0.0; channels];
        let mut gb = vec![0.0; channels];
        let mut segs = Vec::new();
        // d(loss)/d(mean_t) and d(loss)/d(E[x²]_t), divided by the count.
        let mut r1 = vec![0.0; frames];
        let mut r2 = vec![0.0; frames];
        for g in 0..self.groups() {
            for t in 0..frames {
                let mu = self.mean[g * frames + t];
                let iv = self.inv[g * frames + t];
                segments(self.mode, self.dims, g, t, &mut segs);
                let (mut a, mut b) = (0.0, 0.0);
                for &(start, ch) in &segs {
                    for i in start..start + bins {
                        let centered = x[i] - mu;
                        let d = gy[i] * gm[ch];
                        gg[ch] += gy[i] * centered * iv;
                        gb[ch] += gy[i];
                        a += d;
                        b += d * centered;
                    }
                }
                let count = ((t + 1) * per_frame) as f64;
                let g_mean = -iv * a + mu * iv.powi(3) * b;
                let g_m2 = -0.5 * iv.powi(3) * b;
                r1[t] = g_mean / count;
                r2[t] = g_m2 / count;
            }
            // Suffix sums: frame s feeds the statistics of every t ≥ s.
            for t in (0..frames.saturating_sub(1)).rev() {
                r1[t] += r1[t + 1];
                r2[t] += r2[t + 1];
            }
            for t in 0..frames {
                let iv = self.inv[g * frames + t];
                segments(self.mode, self.dims, g, t, &mut segs);
                for &(start, ch) in &segs {
                    for i in start..start + bins {
                        gx[i] = gy[i] * gm[ch] * iv + r1[t] + 2.0 * x[i] * r2[t];
                    }
                }
            }
        }
        vec![Some(gx), Some(gg), Some(gb)]
    }
}

struct LayerNormOp {
    input: Var,
    gamma: Var,
    beta: Var,
    inv: Vec<f64>,
    xhat: Vec<f64>,
    width: usize,
}

/// Layer normalisation over the last axis with per-feature affine.
pub fn layer_norm(input: &Var, gamma: &Var, beta: &Var, eps: f64) -> Result<Var> {
    let shape = input.shape();
    let width = *shape
        .last()
        .ok_or_else(|| shape_err("layer_norm", "scalar input"))?;
    check_affine("layer_norm", gamma, beta, width)?;
    let x = input.data();
    let (gm, bt) = (gamma.data(), beta.data());
    let mut xhat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    let mut inv = Vec::with_capacity(x.len() / width.max(1));
    for (row, chunk) in x.chunks(width).enumerate() {
        let mean = chunk.iter().sum::<f64>() / width as f64;
        let var = chunk.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / width as f64;
        let iv = 1.0 / (var + eps).sqrt();
        inv.push(iv);
        for (k, v) in chunk.iter().enumerate() {
            let i = row * width + k;
            xhat[i] = (v - mean) * iv;
            out[i] = gm[k] * xhat[i] + bt[k];
        }
    }
    let value = Tensor::new(shape.to_vec(), out)?;
    Ok(Var::from_op(
        value,
        LayerNormOp { input: input.clone(), gamma: gamma.clone(), beta: beta.clone(), inv, xhat, width },
    ))
}

impl Backward for LayerNormOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.input, &self.gamma, &self.beta]
    }
    fn backward(&self, _out: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let gm = self.gamma.data();
        let w = self.width;
        let mut gx = vec![0.0; gy.len()];
        let mut gg = vec![0.0; w];
        let mut gb = vec![0.0; w];
        let mut dxhat = vec![0.0; w];
        for (row, (gchunk, xchunk)) in gy.chunks(w).zip(self.xhat.chunks(w)).enumerate() {
            for k in 0..w {
                dxhat[k] = gchunk[k] * gm[k];
                gg[k] += gchunk[k] * xchunk[k];
                gb[k] += gchunk[k];
            }
            group_norm_backward(&dxhat, xchunk, self.inv[row], &mut gx[row * w..(row + 1) * w]);
        }
        vec![Some(gx), Some(gg), Some(gb)]
    }
}
