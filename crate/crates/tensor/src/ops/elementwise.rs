use crate::error::{shape_err, Result};
use crate::graph::{Backward, Var};
use crate::tensor::Tensor;

fn same_shape(op: &'static str, a: &Var, b: &Var) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

struct AddOp(Var, Var);

impl Backward for AddOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.0, &self.1]
    }
    fn backward(&self, _out: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        vec![Some(grad.to_vec()), Some(grad.to_vec())]
    }
}

pub fn add(a: &Var, b: &Var) -> Result<Var> {
    same_shape("add", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Ok(Var::from_op(Tensor::new(a.shape().to_vec(), data)?, AddOp(a.clone(), b.clone())))
}

struct MulOp(Var, Var);

impl Backward for MulOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.0, &self.1]
    }
    fn backward(&self, _out: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        let ga = grad.iter().zip(self.1.data()).map(|(g, b)| g * b).collect();
        let gb = grad.iter().zip(self.0.data()).map(|(g, a)| g * a).collect();
        vec![Some(ga), Some(gb)]
    }
}

/// Elementwise product.
pub fn mul(a: &Var, b: &Var) -> Result<Var> {
    same_shape("mul", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Ok(Var::from_op(Tensor::new(a.shape().to_vec(), data)?, MulOp(a.clone(), b.clone())))
}

struct ScaleOp(Var, f64);

impl Backward for ScaleOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.0]
    }
    fn backward(&self, _out: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        vec![Some(grad.iter().map(|g| g * self.1).collect())]
    }
}

/// Multiplication by a constant.
pub fn scale(a: &Var, factor: f64) -> Var {
    let data = a.data().iter().map(|x| x * factor).collect();
    Var::from_op(
        Tensor::new(a.shape().to_vec(), data).expect("same shape"),
        ScaleOp(a.clone(), factor),
    )
}

struct SumOp(Var);

impl Backward for SumOp {
    fn inputs(&self) -> Vec<&Var> {
        vec![&self.0]
    }
    fn backward(&self, _out: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        vec![Some(vec![grad[0]; self.0.value().numel()])]
    }
}

/// Sum of all elements, as a one-element tensor.
pub fn sum(a: &Var) -> Var {
    let total = a.data().iter().sum();
    Var::from_op(Tensor::scalar(total), SumOp(a.clone()))
}
