use crate::error::{shape_err, Result};
use crate::graph::{Backward, Var};
use crate::tensor::Tensor;

use super::activation::sigmoid_scalar;

/// Plain-slice LSTM cell parameters. Gate rows are ordered `i, f, g, o`.
#[derive(Debug, Clone)]
pub struct LstmWeights {
    /// `4H × I`, row-major.
    pub w_ih: Vec<f64>,
    /// `4H × H`, row-major.
    pub w_hh: Vec<f64>,
    /// `4H`.
    pub bias: Vec<f64>,
    pub input_size: usize,
    pub hidden: usize,
}

impl LstmWeights {
    fn check(&self) -> Result<()> {
        let (i, h) = (self.input_size, self.hidden);
        if self.w_ih.len() != 4 * h * i || self.w_hh.len() != 4 * h * h || self.bias.len() != 4 * h {
            return Err(shape_err(
                "lstm_step",
                format!(
                    "weights {}/{}/{} for input {i}, hidden {h}",
                    self.w_ih.len(),
                    self.w_hh.len(),
                    self.bias.len()
                ),
            ));
        }
        Ok(())
    }
}

/// Pre-activations `W_ih·x + W_hh·h + b` for one sequence element.
fn gate_inputs(w_ih: &[f64], w_hh: &[f64], bias: &[f64], x: &[f64], h: &[f64], out: &mut [f64]) {
    let (ni, nh) = (x.len(), h.len());
    for (r, z) in out.iter_mut().enumerate() {
        let mut acc = bias[r];
        for (w, v) in w_ih[r * ni..(r + 1) * ni].iter().zip(x) {
            acc += w * v;
        }
        for (w, v) in w_hh[r * nh..(r + 1) * nh].iter().zip(h) {
            acc += w * v;
        }
        *z = acc;
    }
}

/// One LSTM step. Returns `(h', c')`.
pub fn lstm_step(weights: &LstmWeights, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    weights.check()?;
    let hd = weights.hidden;
    if x.len() != weights.input_size || h.len() != hd || c.len() != hd {
        return Err(shape_err(
            "lstm_step",
            format!("x {}, h {}, c {} for input {}, hidden {hd}", x.len(), h.len(), c.len(), weights.input_size),
        ));
    }
    let mut z = vec![0.0; 4 * hd];
    gate_inputs(&weights.w_ih, &weights.w_hh, &weights.bias, x, h, &mut z);
    let mut h_new = vec![0.0; hd];
    let mut c_new = vec![0.0; hd];
    for k in 0..hd {
        let i = sigmoid_scalar(z[k]);
        let f = sigmoid_scalar(z[hd + k]);
        let g = z[2 * hd + k].tanh();
        let o = sigmoid_scalar(z[3 * hd + k]);
        c_new[k] = f * c[k] + i * g;
        h_new[k] = o * c_new[k].tanh();
    }
    Ok((h_new, c_new))
}

struct LstmOp {
    input: Var,
    w_ih: Var,
    w_hh: Var,
    bias: Var,
    batch: usize,
    frames: usize,
    in_dim: usize,
    hidden: usize,
    /// Gate activations `i, f, g, o` per `(b, t)`, `4H` each.
    gates: Vec<f64>,
    /// Cell states per `(b, t)`.
    cells: Vec<f64>,
}

/// Runs a single-layer LSTM over `B × T × I` input from zero state and
/// returns all hidden states, `B × T × H`.
pub fn lstm(input: &Var, w_ih: &Var, w_hh: &Var, bias: &Var) -> Result<Var> {
    let (batch, frames, in_dim) = match input.shape() {
        &[b, t, i] => (b, t, i),
        s => return Err(shape_err("lstm", format!("input must be B×T×I, got {s:?}"))),
    };
    let hidden = match w_hh.shape() {
        &[r, h] if r == 4 * h => h,
        s => return Err(shape_err("lstm", format!("w_hh must be 4H×H, got {s:?}"))),
    };
    if w_ih.shape() != [4 * hidden, in_dim] || bias.shape() != [4 * hidden] {
        return Err(shape_err(
            "lstm",
            format!("w_ih {:?}, bias {:?} for input {in_dim}, hidden {hidden}", w_ih.shape(), bias.shape()),
        ));
    }
    let x = input.data();
    let (wi, wh, bv) = (w_ih.data(), w_hh.data(), bias.data());
    let h4 = 4 * hidden;
    let mut out = vec![0.0; batch * frames * hidden];
    let mut gates = vec![0.0; batch * frames * h4];
    let mut cells = vec![0.0; batch * frames * hidden];
    let zero = vec![0.0; hidden];
    for b in 0..batch {
        for t in 0..frames {
            let bt = b * frames + t;
            let xt = &x[bt * in_dim..(bt + 1) * in_dim];
            let (h_prev, c_prev) = if t == 0 {
                (&zero[..], &zero[..])
            } else {
                (&out[(bt - 1) * hidden..bt * hidden], &cells[(bt - 1) * hidden..bt * hidden])
            };
            let z = &mut gates[bt * h4..(bt + 1) * h4];
            gate_inputs(wi, wh, bv, xt, h_prev, z);
            let mut c_new = vec![0.0; hidden];
            let mut h_new = vec![0.0; hidden];
            for k in 0..hidden {
                let i = sigmoid_scalar(z[k]);
                let f = sigmoid_scalar(z[hidden + k]);
                let g = z[2 * hidden + k].tanh();
                let o = sigmoid_scalar(z[3 * hidden + k]);
                z[k] = i;
                z[hidden + k] = f;
                z[2 * hidden + k] = g;
                z[3 * hidden + k] = o;
                c_new[k] = f * c_prev[k] + i * g;
                h_new[k] = o * c_new[k].tanh();
            }
            cells[bt * hidden..(bt + 1) * hidden].copy_from_slice(&c_new);
            out[bt * hidden..(bt + 1) * hidden].copy_from_slice(&h_new);
        }
    }
    let value = Tensor::new(vec![batch, frames, hidden], out)?;
    Ok(Var::from_op(
        value,
        LstmOp {
            input: input.clone(),
            w_ih: w_ih.clone(),
            w_hh: w_hh.clone(),
            bias: bias.clone(),
            batch,
            frames,
            in_dim,
            hidden,
            gates,
            cells,
        },
    ))
}

impl Backward for LstmOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.input, &self.w_ih, &self.w_hh, &self.bias]
    }

    fn backward(&self, output: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (hd, id) = (self.hidden, self.in_dim);
        let h4 = 4 * hd;
        let x = self.input.data();
        let hs = output.data();
        let (wi, wh) = (self.w_ih.data(), self.w_hh.data());
        let mut gx = self.input.requires_grad().then(|| vec![0.0; x.len()]);
        let mut gwi = vec![0.0; wi.len()];
        let mut gwh = vec![0.0; wh.len()];
        let mut gb = vec![0.0; h4];
        let mut dz = vec![0.0; h4];
        for b in 0..self.batch {
            let mut dh_next = vec![0.0; hd];
            let mut dc_next = vec![0.0; hd];
            for t in (0..self.frames).rev() {
                let bt = b * self.frames + t;
                let gate = &self.gates[bt * h4..(bt + 1) * h4];
                let c = &self.cells[bt * hd..(bt + 1) * hd];
                for k in 0..hd {
                    let (i, f, g, o) = (gate[k], gate[hd + k], gate[2 * hd + k], gate[3 * hd + k]);
                    let c_prev = if t == 0 { 0.0 } else { self.cells[(bt - 1) * hd + k] };
                    let tc = c[k].tanh();
                    let dh = gy[bt * hd + k] + dh_next[k];
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                    dz[k] = dc * g * i * (1.0 - i);
                    dz[hd + k] = dc * c_prev * f * (1.0 - f);
                    dz[2 * hd + k] = dc * i * (1.0 - g * g);
                    dz[3 * hd + k] = dh * tc * o * (1.0 - o);
                    dc_next[k] = dc * f;
                }
                let xt = &x[bt * id..(bt + 1) * id];
                dh_next.iter_mut().for_each(|v| *v = 0.0);
                for (r, &d) in dz.iter().enumerate() {
                    gb[r] += d;
                    for (g, xv) in gwi[r * id..(r + 1) * id].iter_mut().zip(xt) {
                        *g += d * xv;
                    }
                    if t > 0 {
                        let h_prev = &hs[(bt - 1) * hd..bt * hd];
                        for (g, hv) in gwh[r * hd..(r + 1) * hd].iter_mut().zip(h_prev) {
                            *g += d * hv;
                        }
                    }
                    for (dn, w) in dh_next.iter_mut().zip(&wh[r * hd..(r + 1) * hd]) {
                        *dn += d * w;
                    }
                    if let Some(gx) = gx.as_mut() {
                        for (gv, w) in gx[bt * id..(bt + 1) * id].iter_mut().zip(&wi[r * id..(r + 1) * id]) {
                            *gv += d * w;
                        }
                    }
                }
            }
        }
        vec![gx, Some(gwi), Some(gwh), Some(gb)]
    }
}
