//! Complex-valued helpers over real tensors whose channel axis stores real
//! parts first and imaginary parts second: `[re_0..re_{P-1}, im_0..im_{P-1}]`.

use crate::error::{shape_err, Result};
use crate::graph::{Backward, Var};
use crate::tensor::Tensor;

fn split_dims(op: &'static str, v: &Var) -> Result<[usize; 4]> {
    match v.shape() {
        &[n, c, t, f] if c % 2 == 0 && c > 0 => Ok([n, c, t, f]),
        s => Err(shape_err(op, format!("expected N×2P×T×F, got {s:?}"))),
    }
}

struct FilterSumOp {
    weights: Var,
    mixture: Var,
    conj: bool,
    dims: [usize; 4],
}

/// Framewise filter-and-sum `Y = Σ_p conj(W_p)·X_p` (or `W_p·X_p` with
/// `conj == false`). Both inputs are `N × 2P × T × F`; the output is
/// `N × 2 × T × F`.
pub fn filter_and_sum(weights: &Var, mixture: &Var, conj: bool) -> Result<Var> {
    let dims = split_dims("filter_and_sum", weights)?;
    if mixture.shape() != weights.shape() {
        return Err(shape_err(
            "filter_and_sum",
            format!("weights {:?} vs mixture {:?}", weights.shape(), mixture.shape()),
        ));
    }
    let [n, c2, t, f] = dims;
    let p = c2 / 2;
    let plane = t * f;
    let (w, x) = (weights.data(), mixture.data());
    let sign = if conj { -1.0 } else { 1.0 };
    let mut out = vec![0.0; n * 2 * plane];
    for b in 0..n {
        let base = b * c2 * plane;
        let (ore, oim) = out[b * 2 * plane..(b + 1) * 2 * plane].split_at_mut(plane);
        for m in 0..p {
            let (re, im) = (base + m * plane, base + (m + p) * plane);
            for k in 0..plane {
                let (wr, wi) = (w[re + k], sign * w[im + k]);
                let (xr, xi) = (x[re + k], x[im + k]);
                ore[k] += wr * xr - wi * xi;
                oim[k] += wr * xi + wi * xr;
            }
        }
    }
    let value = Tensor::new(vec![n, 2, t, f], out)?;
    Ok(Var::from_op(
        value,
        FilterSumOp { weights: weights.clone(), mixture: mixture.clone(), conj, dims },
    ))
}

impl Backward for FilterSumOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.weights, &self.mixture]
    }

    fn backward(&self, _out: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let [n, c2, t, f] = self.dims;
        let p = c2 / 2;
        let plane = t * f;
        let (w, x) = (self.weights.data(), self.mixture.data());
        let sign = if self.conj { -1.0 } else { 1.0 };
        let mut gw = self.weights.requires_grad().then(|| vec![0.0; w.len()]);
        let mut gx = self.mixture.requires_grad().then(|| vec![0.0; x.len()]);
        for b in 0..n {
            let base = b * c2 * plane;
            let (gre, gim) = gy[b * 2 * plane..(b + 1) * 2 * plane].split_at(plane);
            for m in 0..p {
                let (re, im) = (base + m * plane, base + (m + p) * plane);
                for k in 0..plane {
                    let (gr, gi) = (gre[k], gim[k]);
                    if let Some(gw) = gw.as_mut() {
                        let (xr, xi) = (x[re + k], x[im + k]);
                        gw[re + k] += gr * xr + gi * xi;
                        gw[im + k] += sign * (-gr * xi + gi * xr);
                    }
                    if let Some(gx) = gx.as_mut() {
                        let (wr, wi) = (w[re + k], sign * w[im + k]);
                        gx[re + k] += gr * wr + gi * wi;
                        gx[im + k] += -gr * wi + gi * wr;
                    }
                }
            }
        }
        vec![gw, gx]
    }
}

/// Values of the two loss terms and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub ri: f64,
    pub mag: f64,
    pub total: f64,
}

struct SpectralLossOp {
    estimate: Var,
    target: Var,
    lambda_ri: f64,
    lambda_mag: f64,
}

/// `λ_ri·mean|Ŝ−S|² + λ_mag·mean(|Ŝ|−|S|)²` over `N × 2 × T × F` spectra,
/// averaged over all `(n, t, f)` points.
pub fn spectral_loss(estimate: &Var, target: &Var, lambda_ri: f64, lambda_mag: f64) -> Result<(Var, LossTerms)> {
    let dims = split_dims("spectral_loss", estimate)?;
    if dims[1] != 2 || target.shape() != estimate.shape() {
        return Err(shape_err(
            "spectral_loss",
            format!("estimate {:?} vs target {:?}, expected N×2×T×F", estimate.shape(), target.shape()),
        ));
    }
    let (ri, mag) = loss_terms(estimate.data(), target.data(), dims);
    let total = lambda_ri * ri + lambda_mag * mag;
    let var = Var::from_op(
        Tensor::scalar(total),
        SpectralLossOp { estimate: estimate.clone(), target: target.clone(), lambda_ri, lambda_mag },
    );
    Ok((var, LossTerms { ri, mag, total }))
}

fn loss_terms(e: &[f64], s: &[f64], [n, _, t, f]: [usize; 4]) -> (f64, f64) {
    let plane = t * f;
    let (mut ri, mut mag) = (0.0, 0.0);
    for b in 0..n {
        let (re, im) = (b * 2 * plane, b * 2 * plane + plane);
        for k in 0..plane {
            let (er, ei, sr, si) = (e[re + k], e[im + k], s[re + k], s[im + k]);
            ri += (er - sr).powi(2) + (ei - si).powi(2);
            mag += (er.hypot(ei) - sr.hypot(si)).powi(2);
        }
    }
    let count = (n * plane) as f64;
    (ri / count, mag / count)
}

impl Backward for SpectralLossOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.estimate, &self.target]
    }

    fn backward(&self, _out: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let [n, _, t, f] = split_dims("spectral_loss", &self.estimate).expect("checked in forward");
        let plane = t * f;
        let (e, s) = (self.estimate.data(), self.target.data());
        let scale = gy[0] * 2.0 / (n * plane) as f64;
        let mut ge = vec![0.0; e.len()];
        let mut gs = vec![0.0; s.len()];
        for b in 0..n {
            let (re, im) = (b * 2 * plane, b * 2 * plane + plane);
            for k in 0..plane {
                let (er, ei, sr, si) = (e[re + k], e[im + k], s[re + k], s[im + k]);
                let (me, ms) = (er.hypot(ei), sr.hypot(si));
                let diff = me - ms;
                // d|z|/dz is undefined at zero; take it as zero there.
                let (ue_r, ue_i) = if me > 0.0 { (er / me, ei / me) } else { (0.0, 0.0) };
                let (us_r, us_i) = if ms > 0.0 { (sr / ms, si / ms) } else { (0.0, 0.0) };
                ge[re + k] = scale * (self.lambda_ri * (er - sr) + self.lambda_mag * diff * ue_r);
                ge[im + k] = scale * (self.lambda_ri * (ei - si) + self.lambda_mag * diff * ue_i);
                gs[re + k] = -scale * (self.lambda_ri * (er - sr) + self.lambda_mag * diff * us_r);
                gs[im + k] = -scale * (self.lambda_ri * (ei - si) + self.lambda_mag * diff * us_i);
            }
        }
        vec![Some(ge), Some(gs)]
    }
}
