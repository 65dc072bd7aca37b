use eabnet_tensor::ops;
use eabnet_tensor::Var;

use crate::error::Result;

/// Single-channel post-processing stage applied after beamforming. It sees
/// the beamformer estimate and the (compressed) reference channel, both
/// `N × 2 × T × F`, and returns a refined `N × 2 × T × F` estimate.
/// Implementations must be causal in time to keep the pipeline causal.
pub trait PostProcessor: Send + Sync {
    fn name(&self) -> &str;
    fn process(&self, estimate: &Var, reference: &Var) -> Result<Var>;
}

/// Pass-through; the default post-processor.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPost;

impl PostProcessor for IdentityPost {
    fn name(&self) -> &str {
        "identity"
    }

    fn process(&self, estimate: &Var, _reference: &Var) -> Result<Var> {
        Ok(estimate.clone())
    }
}

/// Outputs silence.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPost;

impl PostProcessor for ZeroPost {
    fn name(&self) -> &str {
        "zero"
    }

    fn process(&self, estimate: &Var, _reference: &Var) -> Result<Var> {
        Ok(ops::scale(estimate, 0.0))
    }
}
