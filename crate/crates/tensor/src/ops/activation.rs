use crate::error::{shape_err, Result};
use crate::graph::{Backward, Var};
use crate::ops::elementwise::mul;
use crate::tensor::Tensor;

#[inline]
pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

enum Kind {
    Sigmoid,
    Tanh,
    Relu,
}

struct ActivationOp {
    input: Var,
    kind: Kind,
}

impl Backward for ActivationOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.input]
    }
    fn backward(&self, out: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        let g = match self.kind {
            Kind::Sigmoid => grad.iter().zip(out.data()).map(|(g, y)| g * y * (1.0 - y)).collect(),
            Kind::Tanh => grad.iter().zip(out.data()).map(|(g, y)| g * (1.0 - y * y)).collect(),
            Kind::Relu => grad
                .iter()
                .zip(self.input.data())
                .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                .collect(),
        };
        vec![Some(g)]
    }
}

fn activation(input: &Var, kind: Kind, f: impl Fn(f64) -> f64) -> Var {
    let data = input.data().iter().map(|&x| f(x)).collect();
    let value = Tensor::new(input.shape().to_vec(), data).expect("same shape");
    Var::from_op(value, ActivationOp { input: input.clone(), kind })
}

pub fn sigmoid(x: &Var) -> Var {
    activation(x, Kind::Sigmoid, sigmoid_scalar)
}

pub fn tanh(x: &Var) -> Var {
    activation(x, Kind::Tanh, f64::tanh)
}

pub fn relu(x: &Var) -> Var {
    activation(x, Kind::Relu, |v| v.max(0.0))
}

/// Gated linear unit: `linear ⊙ sigmoid(gate)` for two pre-computed
/// branches of identical shape.
pub fn glu(linear: &Var, gate: &Var) -> Result<Var> {
    if linear.shape() != gate.shape() {
        return Err(shape_err(
            "glu",
            format!("linear branch {:?} vs gate branch {:?}", linear.shape(), gate.shape()),
        ));
    }
    mul(linear, &sigmoid(gate))
}

struct PreluOp {
    input: Var,
    alpha: Var,
    inner: usize,
}

impl Backward for PreluOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.input, &self.alpha]
    }
    fn backward(&self, _out: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        let x = self.input.data();
        let alpha = self.alpha.data();
        let channels = alpha.len();
        let mut gx = vec![0.0; x.len()];
        let mut ga = vec![0.0; channels];
        for (i, (&xi, &g)) in x.iter().zip(grad).enumerate() {
            let c = (i / self.inner) % channels;
            if xi >= 0.0 {
                gx[i] = g;
            } else {
                gx[i] = g * alpha[c];
                ga[c] += g * xi;
            }
        }
        vec![Some(gx), Some(ga)]
    }
}

/// Parametric ReLU with one slope per channel (axis 1).
pub fn prelu(input: &Var, alpha: &Var) -> Result<Var> {
    let shape = input.shape();
    if shape.len() < 2 || alpha.value().numel() != shape[1] {
        return Err(shape_err(
            "prelu",
            format!("input {:?} needs {} slopes, got {:?}", shape, shape.get(1).unwrap_or(&0), alpha.shape()),
        ));
    }
    let channels = shape[1];
    let inner: usize = shape[2..].iter().product();
    let a = alpha.data();
    let data = input
        .data()
        .iter()
        .enumerate()
        .map(|(i, &x)| if x >= 0.0 { x } else { a[(i / inner) % channels] * x })
        .collect();
    let value = Tensor::new(shape.to_vec(), data)?;
    Ok(Var::from_op(value, PreluOp { input: input.clone(), alpha: alpha.clone(), inner }))
}
