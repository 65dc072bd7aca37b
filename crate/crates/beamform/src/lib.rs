//! Classic multichannel beamforming: ideal ratio masks, mask-weighted
//! spatial covariance matrices, principal-eigenvector steering vectors and
//! MVDR weights, plus an oracle-mask MVDR pipeline.

mod covariance;
mod error;
pub mod linalg;
mod mask;
mod mvdr;
mod pipeline;

pub use covariance::{spatial_covariance, SpatialCovariance, COVARIANCE_FLOOR};
pub use error::{BeamformError, Result};
pub use mask::{irm, TfMask};
pub use mvdr::{
    apply_utterance_beamformer, mvdr_weights, steering_from_covariance, steering_whitened, whitened_steering_bin,
    BeamformerWeights, SteeringNorm,
    SteeringVector, DIAGONAL_LOADING,
};
pub use pipeline::{oracle_mvdr, oracle_mvdr_with, OracleMvdr, SteeringMethod};
