use crate::error::{shape_err, Result};
use crate::graph::{Backward, Var};
use crate::tensor::Tensor;

struct LinearOp {
    input: Var,
    weight: Var,
    bias: Option<Var>,
    rows: usize,
    in_dim: usize,
    out_dim: usize,
}

/// `y = x·Wᵀ + b` applied over the last axis. `weight` is `O × I`, `bias`
/// is `O`.
pub fn linear(input: &Var, weight: &Var, bias: Option<&Var>) -> Result<Var> {
    let shape = input.shape();
    let in_dim = *shape.last().ok_or_else(|| shape_err("linear", "scalar input"))?;
    let (out_dim, w_in) = match weight.shape() {
        &[o, i] => (o, i),
        s => return Err(shape_err("linear", format!("weight must be O×I, got {s:?}"))),
    };
    if w_in != in_dim {
        return Err(shape_err("linear", format!("input width {in_dim} vs weight {:?}", weight.shape())));
    }
    if let Some(b) = bias {
        if b.shape() != [out_dim] {
            return Err(shape_err("linear", format!("bias {:?}, expected [{out_dim}]", b.shape())));
        }
    }
    let rows = input.value().numel() / in_dim.max(1);
    let x = input.data();
    let w = weight.data();
    let mut out = vec![0.0; rows * out_dim];
    for r in 0..rows {
        let xr = &x[r * in_dim..(r + 1) * in_dim];
        for o in 0..out_dim {
            let mut acc = bias.map_or(0.0, |b| b.data()[o]);
            for (wv, xv) in w[o * in_dim..(o + 1) * in_dim].iter().zip(xr) {
                acc += wv * xv;
            }
            out[r * out_dim + o] = acc;
        }
    }
    let mut out_shape = shape.to_vec();
    *out_shape.last_mut().unwrap() = out_dim;
    Ok(Var::from_op(
        Tensor::new(out_shape, out)?,
        LinearOp { input: input.clone(), weight: weight.clone(), bias: bias.cloned(), rows, in_dim, out_dim },
    ))
}

impl Backward for LinearOp {
    fn inputs(&self) -> Vec<&Var> {
        let mut v = vec![&self.input, &self.weight];
        if let Some(b) = &self.bias {
            v.push(b);
        }
        v
    }

    fn backward(&self, _out: &Tensor, gy: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (i_dim, o_dim) = (self.in_dim, self.out_dim);
        let x = self.input.data();
        let w = self.weight.data();
        let mut gx = self.input.requires_grad().then(|| vec![0.0; x.len()]);
        let mut gw = vec![0.0; w.len()];
        let mut gb = vec![0.0; o_dim];
        for r in 0..self.rows {
            let xr = &x[r * i_dim..(r + 1) * i_dim];
            for o in 0..o_dim {
                let g = gy[r * o_dim + o];
                if g == 0.0 {
                    continue;
                }
                gb[o] += g;
                let wr = &w[o * i_dim..(o + 1) * i_dim];
                for (gwv, xv) in gw[o * i_dim..(o + 1) * i_dim].iter_mut().zip(xr) {
                    *gwv += g * xv;
                }
                if let Some(gx) = gx.as_mut() {
                    for (gxv, wv) in gx[r * i_dim..(r + 1) * i_dim].iter_mut().zip(wr) {
                        *gxv += g * wv;
                    }
                }
            }
        }
        let mut grads = vec![gx, Some(gw)];
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
    fn identity_weight_passes_input_through() {
        let x = Var::constant(Tensor::from_fn([2, 3], |i| i as f64 - 2.5));
        let w = Var::constant(Tensor::from_fn([3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 }));
        let b = Var::constant(Tensor::zeros([3]));
        let y = linear(&x, &w, Some(&b)).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let x = Var::constant(Tensor::zeros([2, 3]));
        let w = Var::constant(Tensor::zeros([4, 2]));
        assert!(linear(&x, &w, None).unwrap_err().to_string().starts_with("linear"));
    }
}
