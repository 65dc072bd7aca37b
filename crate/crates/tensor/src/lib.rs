//! A small reverse-mode automatic differentiation engine.
//!
//! Values are dense `f64` tensors in row-major order. Computations build a
//! graph of reference-counted [`Var`] nodes; [`backward`] walks it in
//! reverse topological order and returns exact gradients for every leaf
//! that requires them. Inside [`no_grad`] no graph is recorded, so
//! intermediate activations are dropped as soon as they go out of scope.
//!
//! The operator set is deliberately narrow: exactly the layers the EaBNet
//! beamformer needs (causal 2-D (de)convolution, instance / cumulative /
//! layer normalisation, PReLU, gating nonlinearities, fused LSTM, linear
//! layers, shape plumbing and a pair of complex-spectrum ops).
//!
//! Image-like tensors use the `N × C × T × F` layout (batch, channel,
//! time frame, frequency bin).

mod checkpoint;
mod error;
pub mod gradcheck;
mod graph;
pub mod ops;
mod params;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, NamedTensor};
pub use error::{Result, TensorError};
pub use graph::{backward, grad_enabled, no_grad, Gradients, Var};
pub use params::{InitScheme, Initializer, Param, ParamId, ParamStore};
pub use tensor::Tensor;
