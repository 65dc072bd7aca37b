use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use crate::error::{Result, TensorError};
use crate::params::ParamId;
use crate::tensor::Tensor;

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
    static NEXT_ID: Cell<usize> = const { Cell::new(0) };
}

/// Runs `f` without recording a graph. Nested calls are fine.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|g| g.set(self.0));
        }
    }
    let _restore = Restore(GRAD_ENABLED.with(|g| g.replace(false)));
    f()
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

fn next_id() -> usize {
    NEXT_ID.with(|n| {
        let id = n.get();
        n.set(id + 1);
        id
    })
}

/// Backward rule of one recorded operation.
pub(crate) trait Backward {
    fn inputs(&self) -> Vec<&Var>;
    /// Gradients w.r.t. each input (same order as [`Backward::inputs`]),
    /// given the upstream gradient of the output. `None` means "no
    /// contribution".
    fn backward(&self, output: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>>;
}

struct Node {
    id: usize,
    value: Tensor,
    op: Option<Box<dyn Backward>>,
    requires_grad: bool,
    param: Option<ParamId>,
}

/// A node in the computation graph.
#[derive(Clone)]
pub struct Var(Rc<Node>);

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.0.id)
            .field("shape", &self.0.value.shape())
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

impl Var {
    /// Leaf that never receives a gradient.
    pub fn constant(value: Tensor) -> Var {
        Self::leaf(value, false, None)
    }

    /// Leaf whose gradient is tracked.
    pub fn variable(value: Tensor) -> Var {
        Self::leaf(value, true, None)
    }

    pub(crate) fn leaf(value: Tensor, requires_grad: bool, param: Option<ParamId>) -> Var {
        Var(Rc::new(Node { id: next_id(), value, op: None, requires_grad, param }))
    }

    /// Wraps an op result, recording the op only when some input needs a
    /// gradient and recording is enabled.
    pub(crate) fn from_op(value: Tensor, op: impl Backward + 'static) -> Var {
        let requires_grad = grad_enabled() && op.inputs().iter().any(|v| v.requires_grad());
        let op: Option<Box<dyn Backward>> = if requires_grad { Some(Box::new(op)) } else { None };
        Var(Rc::new(Node { id: next_id(), value, op, requires_grad, param: None }))
    }

    pub fn id(&self) -> usize {
        self.0.id
    }

    pub fn value(&self) -> &Tensor {
        &self.0.value
    }

    pub fn shape(&self) -> &[usize] {
        self.0.value.shape()
    }

    pub fn data(&self) -> &[f64] {
        self.0.value.data()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn param(&self) -> Option<ParamId> {
        self.0.param
    }
}

/// Gradients produced by [`backward`].
#[derive(Debug, Default)]
pub struct Gradients {
    leaves: HashMap<usize, Tensor>,
    params: HashMap<ParamId, Tensor>,
}

impl Gradients {
    /// Gradient of a leaf variable, if it participated.
    pub fn wrt(&self, var: &Var) -> Option<&Tensor> {
        self.leaves.get(&var.id())
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(&id)
    }

    pub fn params(&self) -> &HashMap<ParamId, Tensor> {
        &self.params
    }

    pub fn into_params(self) -> HashMap<ParamId, Tensor> {
        self.params
    }
}

/// Reverse-mode sweep from a scalar `loss`.
///
/// Gradients of shared subexpressions are accumulated; intermediate
/// gradients are released as soon as they have been propagated. The graph
/// itself stays intact, so `backward` may be called again on the same loss.
pub fn backward(loss: &Var) -> Result<Gradients> {
    if loss.value().numel() != 1 {
        return Err(TensorError::NotScalar(loss.shape().to_vec()));
    }
    let order = topo_order(loss);
    let mut pending: HashMap<usize, Vec<f64>> = HashMap::new();
    pending.insert(loss.id(), vec![1.0]);
    let mut out = Gradients::default();

    for var in order.iter().rev() {
        let Some(grad) = pending.remove(&var.id()) else { continue };
        match &var.0.op {
            Some(op) => {
                let input_grads = op.backward(var.value(), &grad);
                for (input, g) in op.inputs().into_iter().zip(input_grads) {
                    let Some(g) = g else { continue };
                    if !input.requires_grad() {
                        continue;
                    }
                    debug_assert_eq!(g.len(), input.value().numel());
                    match pending.get_mut(&input.id()) {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        None => {
                            pending.insert(input.id(), g);
                        }
                    }
                }
            }
            None => {
                let tensor = Tensor::new(var.shape().to_vec(), grad)?;
                if let Some(pid) = var.param() {
                    match out.params.get_mut(&pid) {
                        Some(acc) => acc
                            .data_mut()
                            .iter_mut()
                            .zip(tensor.data())
                            .for_each(|(a, b)| *a += b),
                        None => {
                            out.params.insert(pid, tensor.clone());
                        }
                    }
                }
                out.leaves.insert(var.id(), tensor);
            }
        }
    }
    Ok(out)
}

/// Post-order DFS over grad-requiring nodes (iterative; graphs can be deep).
fn topo_order(root: &Var) -> Vec<Var> {
    let mut order = Vec::new();
    let mut visited = HashSet::new();
    if !root.requires_grad() {
        return order;
    }
    let mut stack: Vec<(Var, bool)> = vec![(root.clone(), false)];
    while let Some((var, expanded)) = stack.pop() {
        if expanded {
            order.push(var);
            continue;
        }
        if !visited.insert(var.id()) {
            continue;
        }
        stack.push((var.clone(), true));
        if let Some(op) = &var.0.op {
            for input in op.inputs() {
                if input.requires_grad() && !visited.contains(&input.id()) {
                    stack.push((input.clone(), false));
                }
            }
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops;

    #[test]
    fn non_scalar_loss_rejected() {
        let x = Var::variable(Tensor::zeros([2]));
        assert!(matches!(backward(&x), Err(TensorError::NotScalar(_))));
    }

    #[test]
    fn sum_gradient_is_all_ones() {
        let x = Var::variable(Tensor::from_fn([2, 3], |i| i as f64));
        let loss = ops::sum(&x);
        let grads = backward(&loss).unwrap();
        assert!(grads.wrt(&x).unwrap().data().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn fan_out_accumulates() {
        let x = Var::variable(Tensor::new([1], vec![3.0]).unwrap());
        let y = ops::mul(&x, &x).unwrap();
        let z = ops::add(&y, &x).unwrap();
        let grads = backward(&ops::sum(&z)).unwrap();
        assert_eq!(grads.wrt(&x).unwrap().data(), &[7.0]);
    }

    #[test]
    fn no_grad_records_nothing() {
        let x = Var::variable(Tensor::zeros([2]));
        let y = no_grad(|| ops::sigmoid(&x));
        assert!(!y.requires_grad());
        assert!(grad_enabled());
    }

    #[test]
    fn backward_is_repeatable() {
        let x = Var::variable(Tensor::from_fn([3], |i| i as f64 - 1.0));
        let loss = ops::sum(&ops::tanh(&x));
        let a = backward(&loss).unwrap();
        let b = backward(&loss).unwrap();
        assert_eq!(a.wrt(&x), b.wrt(&x));
    }
}
