use crate::error::{shape_err, Result};
use crate::graph::{Backward, Var};
use crate::tensor::{strides_of, Tensor};

struct ReshapeOp(Var);

impl Backward for ReshapeOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.0]
    }
    fn backward(&self, _out: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        vec![Some(grad.to_vec())]
    }
}

/// Same data, new shape. Element count must match.
pub fn reshape(input: &Var, shape: &[usize]) -> Result<Var> {
    if shape.iter().product::<usize>() != input.value().numel() {
        return Err(shape_err("reshape", format!("{:?} -> {shape:?}", input.shape())));
    }
    let value = Tensor::new(shape.to_vec(), input.data().to_vec())?;
    Ok(Var::from_op(value, ReshapeOp(input.clone())))
}

struct PermuteOp {
    input: Var,
    /// For each output element, its source index in the input.
    source: Vec<usize>,
}

impl Backward for PermuteOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.input]
    }
    fn backward(&self, _out: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        let mut g = vec![0.0; grad.len()];
        for (gv, &src) in grad.iter().zip(&self.source) {
            g[src] = *gv;
        }
        vec![Some(g)]
    }
}

/// Reorders axes: output axis `k` is input axis `axes[k]`.
pub fn permute(input: &Var, axes: &[usize]) -> Result<Var> {
    let in_shape = input.shape();
    let rank = in_shape.len();
    let mut seen = vec![false; rank];
    if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
        return Err(shape_err("permute", format!("axes {axes:?} for shape {in_shape:?}")));
    }
    let out_shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
    let in_strides = strides_of(in_shape);
    let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let n = input.value().numel();
    let mut source = Vec::with_capacity(n);
    let mut index = vec![0usize; rank];
    for _ in 0..n {
        source.push(index.iter().zip(&strides).map(|(i, s)| i * s).sum());
        for k in (0..rank).rev() {
            index[k] += 1;
            if index[k] < out_shape[k] {
                break;
            }
            index[k] = 0;
        }
    }
    let x = input.data();
    let data = source.iter().map(|&s| x[s]).collect();
    Ok(Var::from_op(Tensor::new(out_shape, data)?, PermuteOp { input: input.clone(), source }))
}

struct ConcatOp {
    inputs: Vec<Var>,
    axis: usize,
    outer: usize,
    inner: usize,
}

impl Backward for ConcatOp {
    fn inputs(&self) -> Vec<&Var> {
        self.inputs.iter().collect()
    }
    fn backward(&self, _out: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        let total: usize = self.inputs.iter().map(|v| v.shape()[self.axis]).sum();
        let mut offset = 0;
        let mut grads = Vec::with_capacity(self.inputs.len());
        for v in &self.inputs {
            let len = v.shape()[self.axis] * self.inner;
            let mut g = Vec::with_capacity(v.value().numel());
            for o in 0..self.outer {
                let start = o * total * self.inner + offset;
                g.extend_from_slice(&grad[start..start + len]);
            }
            offset += len;
            grads.push(Some(g));
        }
        grads
    }
}

/// Concatenates along `axis`; all other axes must agree.
pub fn concat(inputs: &[&Var], axis: usize) -> Result<Var> {
    let first = inputs.first().ok_or_else(|| shape_err("concat", "no inputs"))?;
    let shape = first.shape();
    if axis >= shape.len() {
        return Err(shape_err("concat", format!("axis {axis} for shape {shape:?}")));
    }
    for v in inputs {
        let s = v.shape();
        let compatible = s.len() == shape.len()
            && s.iter().zip(shape).enumerate().all(|(k, (a, b))| k == axis || a == b);
        if !compatible {
            return Err(shape_err("concat", format!("{s:?} vs {shape:?} on axis {axis}")));
        }
    }
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let total: usize = inputs.iter().map(|v| v.shape()[axis]).sum();
    let mut data = Vec::with_capacity(outer * total * inner);
    for o in 0..outer {
        for v in inputs {
            let len = v.shape()[axis] * inner;
            data.extend_from_slice(&v.data()[o * len..(o + 1) * len]);
        }
    }
    let mut out_shape = shape.to_vec();
    out_shape[axis] = total;
    Ok(Var::from_op(
        Tensor::new(out_shape, data)?,
        ConcatOp { inputs: inputs.iter().map(|v| (*v).clone()).collect(), axis, outer, inner },
    ))
}
