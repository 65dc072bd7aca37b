use std::fs;
use std::path::{Path, PathBuf};

use eabnet_dsp::WaveBuffer;
use eabnet_io::{read_records, read_wav, require_sample_rate, write_records, write_wav, SampleFormat, SchemaHeader};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RoomError};
use crate::geometry::{ArraySpec, Point, RoomSpec, SceneSpec};
use crate::mixture::{synthesize_mixture, MixOptions, Mixture};
use crate::rir::{FractionalDelay, RirOptions};
use crate::sampler::{sample_scene, scene_seed, SamplerConfig};
use crate::signals::{noise, speech_like, NoiseKind};

pub const MANIFEST_SCHEMA: &str = "eabnet.corpus";
pub const MANIFEST_VERSION: u32 = 1;

/// Where clean speech and noise come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SourcePool {
    Synthetic { noise_kinds: Vec<NoiseKind> },
    /// Mono 16 kHz WAV files; channel 0 is used for multichannel files.
    Files { speech: Vec<PathBuf>, noise: Vec<PathBuf> },
}

impl Default for SourcePool {
    fn default() -> Self {
        SourcePool::Synthetic { noise_kinds: NoiseKind::ALL.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub count: usize,
    pub seed: u64,
    /// Utterance length; sources are cut or tiled to it.
    pub duration_secs: f64,
    pub sample_rate: u32,
    pub sampler: SamplerConfig,
    pub sources: SourcePool,
    pub fractional_delay: FractionalDelay,
    /// Also write the reverberant noise image of the reference channel.
    pub write_noise: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            count: 10,
            seed: 0,
            duration_secs: 6.0,
            sample_rate: 16_000,
            sampler: SamplerConfig::default(),
            sources: SourcePool::default(),
            fractional_delay: FractionalDelay::Round,
            write_noise: false,
        }
    }
}

impl CorpusConfig {
    pub fn samples(&self) -> usize {
        (self.duration_secs * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if !(self.duration_secs > 0.0) || self.samples() == 0 {
            return Err(RoomError::Invalid(format!("duration {} s", self.duration_secs)));
        }
        match &self.sources {
            SourcePool::Synthetic { noise_kinds } if noise_kinds.is_empty() => {
                Err(RoomError::Invalid("empty noise kind list".into()))
            }
            SourcePool::Files { speech, noise } if speech.is_empty() || noise.is_empty() => {
                Err(RoomError::Invalid("empty speech or noise file pool".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Origin of one source signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SourceRef {
    SyntheticSpeech,
    SyntheticNoise { kind: NoiseKind },
    File { path: PathBuf, offset: usize },
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub id: usize,
    pub seed: u64,
    pub room_dims: Point,
    pub rt60: f64,
    pub speed_of_sound: f64,
    pub mic_positions: Vec<Point>,
    pub speech_position: Point,
    pub noise_position: Point,
    pub snr_db: f64,
    pub doa_difference_deg: f64,
    pub samples: usize,
    pub speech_source: SourceRef,
    pub noise_source: SourceRef,
    /// Paths relative to the corpus root.
    pub mixture: PathBuf,
    pub target: PathBuf,
    pub noise: Option<PathBuf>,
}

impl SceneRecord {
    pub fn scene(&self) -> SceneSpec {
        SceneSpec {
            room: RoomSpec { dimensions: self.room_dims, rt60: self.rt60, speed_of_sound: self.speed_of_sound },
            array: ArraySpec { mic_positions: self.mic_positions.clone() },
            speech_position: self.speech_position,
            noise_position: self.noise_position,
            snr_db: self.snr_db,
            seed: self.seed,
        }
    }
}

/// A generated scene held in memory.
#[derive(Debug, Clone)]
pub struct CorpusScene {
    pub record: SceneRecord,
    pub signals: Mixture,
}

impl CorpusScene {
    /// Training target: reverberant speech at the reference microphone.
    pub fn target(&self) -> &[f64] {
        self.signals.speech.channel(0)
    }
}

/// Audio randomness uses a stream separate from scene geometry.
const AUDIO_STREAM: u64 = 0x5EED_A0D1_0000_0001;

fn load_segment(path: &Path, len: usize, rng: &mut ChaCha8Rng, fs: u32) -> Result<(Vec<f64>, usize)> {
    let wave = read_wav(path)?;
    require_sample_rate(&wave, fs)?;
    let x = wave.channel(0);
    if x.is_empty() {
        return Err(RoomError::Invalid(format!("{} is empty", path.display())));
    }
    let offset = if x.len() > len { rng.gen_range(0..=x.len() - len) } else { 0 };
    Ok((x.iter().cycle().skip(offset).take(len).copied().collect(), offset))
}

fn source_signals(cfg: &CorpusConfig, seed: u64) -> Result<(Vec<f64>, SourceRef, Vec<f64>, SourceRef)> {
    let len = cfg.samples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ AUDIO_STREAM);
    match &cfg.sources {
        SourcePool::Synthetic { noise_kinds } => {
            let s = speech_like(&mut rng, len, cfg.sample_rate);
            let kind = *noise_kinds.choose(&mut rng).expect("validated non-empty");
            let n = noise(kind, &mut rng, len, cfg.sample_rate);
            Ok((s, SourceRef::SyntheticSpeech, n, SourceRef::SyntheticNoise { kind }))
        }
        SourcePool::Files { speech, noise } => {
            let sp = speech.choose(&mut rng).expect("validated non-empty").clone();
            let np = noise.choose(&mut rng).expect("validated non-empty").clone();
            let (s, so) = load_segment(&sp, len, &mut rng, cfg.sample_rate)?;
            let (n, no) = load_segment(&np, len, &mut rng, cfg.sample_rate)?;
            Ok((s, SourceRef::File { path: sp, offset: so }, n, SourceRef::File { path: np, offset: no }))
        }
    }
}

fn generate_with_seed(cfg: &CorpusConfig, id: usize, seed: u64) -> Result<CorpusScene> {
    let scene = sample_scene(&cfg.sampler, seed)?;
    let (s, speech_source, n, noise_source) = source_signals(cfg, seed)?;
    let opts = MixOptions {
        rir: RirOptions { sample_rate: cfg.sample_rate, fractional: cfg.fractional_delay, ..Default::default() },
        skip_snr: false,
    };
    let signals = synthesize_mixture(
        &WaveBuffer::mono(s, cfg.sample_rate)?,
        &WaveBuffer::mono(n, cfg.sample_rate)?,
        &scene,
        &opts,
    )?;
    let record = SceneRecord {
        id,
        seed,
        room_dims: scene.room.dimensions,
        rt60: scene.room.rt60,
        speed_of_sound: scene.room.speed_of_sound,
        mic_positions: scene.array.mic_positions.clone(),
        speech_position: scene.speech_position,
        noise_position: scene.noise_position,
        snr_db: scene.snr_db,
        doa_difference_deg: scene.doa_difference_degrees(),
        samples: cfg.samples(),
        speech_source,
        noise_source,
        mixture: PathBuf::from(format!("mixture/{id:06}.wav")),
        target: PathBuf::from(format!("target/{id:06}.wav")),
        noise: cfg.write_noise.then(|| PathBuf::from(format!("noise/{id:06}.wav"))),
    };
    Ok(CorpusScene { record, signals })
}

impl CorpusConfig {
    /// Generates scene `index` in memory.
    pub fn generate(&self, index: usize) -> Result<CorpusScene> {
        self.validate()?;
        generate_with_seed(self, index, scene_seed(self.seed, index as u64))
    }

    /// Generates all `count` scenes in memory, in parallel; the result does
    /// not depend on scheduling.
    pub fn generate_all(&self) -> Result<Vec<CorpusScene>> {
        self.validate()?;
        (0..self.count).into_par_iter().map(|i| self.generate(i)).collect()
    }
}

/// Re-synthesises a scene from its manifest record.
pub fn regenerate_scene(cfg: &CorpusConfig, record: &SceneRecord) -> Result<CorpusScene> {
    cfg.validate()?;
    generate_with_seed(cfg, record.id, record.seed)
}

fn manifest_header() -> SchemaHeader {
    SchemaHeader::new(MANIFEST_SCHEMA, MANIFEST_VERSION)
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[SceneRecord]) -> Result<()> {
    Ok(write_records(path, &manifest_header(), records)?)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<SceneRecord>> {
    Ok(read_records(path, &manifest_header())?)
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| RoomError::Fs { context: path.display().to_string(), source })
}

/// Writes `count` scenes under `root` (`mixture/`, `target/`, optional
/// `noise/`) plus `manifest.jsonl`, and returns the records.
pub fn build_corpus(cfg: &CorpusConfig, root: impl AsRef<Path>) -> Result<Vec<SceneRecord>> {
    let root = root.as_ref();
    cfg.validate()?;
    mkdir(root)?;
    if cfg.count > 0 {
        mkdir(&root.join("mixture"))?;
        mkdir(&root.join("target"))?;
        if cfg.write_noise {
            mkdir(&root.join("noise"))?;
        }
    }
    let records: Vec<SceneRecord> = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let scene = cfg.generate(i)?;
            let rec = &scene.record;
            write_wav(root.join(&rec.mixture), &scene.signals.mixture, SampleFormat::Float32)?;
            write_wav(root.join(&rec.target), &scene.signals.speech.select_channel(0), SampleFormat::Float32)?;
            if let Some(p) = &rec.noise {
                write_wav(root.join(p), &scene.signals.noise.select_channel(0), SampleFormat::Float32)?;
            }
            Ok(scene.record)
        })
        .collect::<Result<_>>()?;
    write_manifest(root.join("manifest.jsonl"), &records)?;
    Ok(records)
}
