//! Room acoustics for multichannel training data: Sabine absorption,
//! image-method impulse responses, reverberant mixtures, randomised scene
//! sampling and on-disk corpora.

mod convolve;
mod corpus;
mod error;
mod geometry;
mod mixture;
mod rir;
mod sampler;
pub mod signals;

pub use convolve::fft_convolve;
pub use corpus::{
    build_corpus, read_manifest, regenerate_scene, write_manifest, CorpusConfig, CorpusScene, SceneRecord,
    SourcePool, SourceRef, MANIFEST_SCHEMA, MANIFEST_VERSION,
};
pub use error::{Result, RoomError};
pub use geometry::{ArraySpec, Point, RoomSpec, SceneSpec};
pub use mixture::{synthesize_mixture, MixOptions, Mixture};
pub use rir::{absorption_from_rt60, default_max_order, image_method_rir, Absorption, FractionalDelay, RirOptions, RirSet};
pub use sampler::{sample_scene, scene_seed, SamplerConfig, DOA_MIN_DEG, MAX_DRAWS};
