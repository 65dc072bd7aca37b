use std::path::Path;

use eabnet_dsp::{compress, stft, StftConfig, WaveBuffer};
use eabnet_io::read_wav;
use eabnet_model::{prepare_input, spectrogram_to_tensor, ModelConfig, COMPRESSION_EXPONENT};
use eabnet_room::{regenerate_scene, CorpusConfig, CorpusScene, SceneRecord};
use eabnet_tensor::Tensor;
use rayon::prelude::*;

use crate::error::{Result, TrainError};

/// One scene ready for training or evaluation.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: usize,
    pub snr_db: f64,
    /// `P`-channel noisy mixture.
    pub mixture: WaveBuffer,
    /// Reverberant speech at the reference microphone.
    pub target: WaveBuffer,
    /// Multichannel speech and noise images, when known.
    pub images: Option<(WaveBuffer, WaveBuffer)>,
}

impl Utterance {
    pub fn from_scene(scene: CorpusScene) -> Result<Self> {
        let target = scene.signals.speech.select_channel(0);
        Ok(Self {
            id: scene.record.id,
            snr_db: scene.record.snr_db,
            mixture: scene.signals.mixture,
            target,
            images: Some((scene.signals.speech, scene.signals.noise)),
        })
    }
}

/// Reads mixtures and targets listed in a manifest; paths are relative to
/// `root`. Source images are not available this way.
pub fn load_from_disk(root: impl AsRef<Path>, records: &[SceneRecord]) -> Result<Vec<Utterance>> {
    let root = root.as_ref();
    records
        .iter()
        .map(|r| {
            let mixture = read_wav(root.join(&r.mixture))?;
            let target = read_wav(root.join(&r.target))?;
            if target.num_channels() != 1 || target.len() != mixture.len() {
                return Err(TrainError::Data(format!(
                    "scene {}: target must be mono with {} samples",
                    r.id,
                    mixture.len()
                )));
            }
            Ok(Utterance { id: r.id, snr_db: r.snr_db, mixture, target, images: None })
        })
        .collect()
}

/// Re-synthesises every scene of a manifest, including source images.
pub fn load_regenerated(cfg: &CorpusConfig, records: &[SceneRecord]) -> Result<Vec<Utterance>> {
    records
        .par_iter()
        .map(|r| Utterance::from_scene(regenerate_scene(cfg, r)?))
        .collect()
}

/// Network input and training target for one utterance.
#[derive(Debug, Clone)]
pub struct Example {
    pub id: usize,
    /// `1 × 2P × T × F`.
    pub input: Tensor,
    /// `1 × 2 × T × F`.
    pub target: Tensor,
}

/// Transforms utterances into model inputs and targets, compressing both
/// when the model works in the compressed domain.
pub fn prepare_examples(utts: &[Utterance], cfg: &ModelConfig, stft_cfg: &StftConfig) -> Result<Vec<Example>> {
    utts.iter()
        .map(|u| {
            let input = prepare_input(&stft(&u.mixture, stft_cfg)?, cfg)?;
            let mut target = stft(&u.target, stft_cfg)?;
            if cfg.compression {
                target = compress(&target, COMPRESSION_EXPONENT)?;
            }
            Ok(Example { id: u.id, input, target: spectrogram_to_tensor(&target) })
        })
        .collect()
}
