//! Differentiable operators. Every function here returns a new [`Var`];
//! gradients flow to any input created with `requires_grad`.
//!
//! [`Var`]: crate::Var

mod activation;
mod complex;
mod conv;
mod elementwise;
mod linear;
mod lstm;
mod norm;
mod shape;

pub use activation::{glu, prelu, relu, sigmoid, tanh};
pub use complex::{filter_and_sum, spectral_loss, LossTerms};
pub use conv::{conv2d, conv2d_output_size, deconv2d, Conv2dSpec, Deconv2dSpec};
pub use elementwise::{add, mul, scale, sum};
pub use linear::linear;
pub use lstm::{lstm, lstm_step, LstmWeights};
pub use norm::{cumulative_norm, instance_norm, layer_norm, CumulativeMode};
pub use shape::{concat, permute, reshape};
