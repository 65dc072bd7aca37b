//! EaBNet: a causal neural beamformer. An embedding module (U²-Encoder,
//! stacked squeezed temporal convolution modules, U²-Decoder) maps the
//! RI-concatenated multichannel spectrum to a real `C × T × F` embedding;
//! a beamforming head turns it into framewise complex filters that are
//! applied by filter-and-sum.
//!
//! All stages are strictly causal in time: output frame `t` depends only
//! on input frames `≤ t`.

mod config;
mod error;
mod layers;
mod network;
mod post;
mod spectra;

pub use config::{BfType, ModelConfig};
pub use error::{ModelError, Result};
pub use network::{Model, ModelOutput, ParamBreakdown, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use post::{IdentityPost, PostProcessor, ZeroPost};
pub use spectra::{
    prepare_input, reference_channel, spectrogram_to_tensor, tensor_to_spectrogram, COMPRESSION_EXPONENT,
};
