use std::fs;
use std::path::{Path, PathBuf};

use eabnet_dsp::WaveBuffer;
use eabnet_io::{read_wav, require_sample_rate, write_wav, IoError, SampleFormat};
use eabnet_model::Model;
use eabnet_room::{
    build_corpus, image_method_rir, read_manifest, sample_scene, scene_seed, CorpusConfig, RirOptions, SceneRecord,
};
use eabnet_tensor::{read_checkpoint, write_checkpoint};
use eabnet_train::{
    enhance_wave, evaluate as run_evaluation, load_from_disk, load_regenerated, prepare_examples, render_table,
    summarize, train as run_training, write_loss_curve, write_metrics, EvalOptions, System, Utterance,
};
use log::{info, warn};
use serde::Serialize;

use crate::config::{RunConfig, SystemKind};
use crate::error::{CliError, Result};

pub const CORPUS_CONFIG_FILE: &str = "corpus_config.json";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.toml";

pub fn version_string() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), env!("EABNET_GIT_DESCRIBE"))
}

fn output<T>(r: std::result::Result<T, IoError>) -> Result<T> {
    r.map_err(|e| CliError::Output(e.to_string()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Output(format!("cannot create {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

/// Creates the output directory and records the configuration actually used.
pub fn prepare_out(cfg: &RunConfig) -> Result<()> {
    create_dir(&cfg.out)?;
    let text = format!("# eabnet {}\n{}", version_string(), cfg.to_toml());
    write_text(&cfg.out.join(EFFECTIVE_CONFIG_FILE), &text)
}

fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| CliError::Config(format!("{what} is not set")))
}

fn load_model(path: &Path) -> Result<Model> {
    let ckpt = read_checkpoint(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(Model::from_checkpoint(&ckpt)?)
}

/// Keeps the first `mics` channels, reference microphone first.
fn first_channels(w: &WaveBuffer, mics: usize) -> Result<WaveBuffer> {
    if w.num_channels() < mics {
        return Err(CliError::Input(format!("{} channels, model expects {mics}", w.num_channels())));
    }
    Ok(WaveBuffer::new(w.channels()[..mics].to_vec(), w.sample_rate())?)
}

fn restrict_mics(utts: Vec<Utterance>, mics: usize) -> Result<Vec<Utterance>> {
    utts.into_iter()
        .map(|mut u| {
            if u.mixture.num_channels() != mics {
                u.mixture = first_channels(&u.mixture, mics)?;
                if let Some((s, n)) = &u.images {
                    u.images = Some((first_channels(s, mics)?, first_channels(n, mics)?));
                }
            }
            Ok(u)
        })
        .collect()
}

/// Reads a corpus directory. With `regenerate`, scenes are re-synthesised
/// from the stored corpus configuration so that source images are present.
fn load_corpus(root: &Path, regenerate: bool) -> Result<Vec<Utterance>> {
    let records: Vec<SceneRecord> = read_manifest(root.join("manifest.jsonl"))?;
    if !regenerate {
        return Ok(load_from_disk(root, &records)?);
    }
    let path = root.join(CORPUS_CONFIG_FILE);
    let text = fs::read_to_string(&path).map_err(|e| {
        CliError::Input(format!("{}: {e} (source images need a corpus written by `simulate`)", path.display()))
    })?;
    let corpus: CorpusConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(load_regenerated(&corpus, &records)?)
}

pub fn simulate(cfg: &RunConfig) -> Result<PathBuf> {
    prepare_out(cfg)?;
    info!("simulating {} scenes of {} s into {}", cfg.corpus.count, cfg.corpus.duration_secs, cfg.out.display());
    let records = build_corpus(&cfg.corpus, &cfg.out)?;
    write_json(&cfg.out.join(CORPUS_CONFIG_FILE), &cfg.corpus)?;
    info!("wrote {} scenes", records.len());
    Ok(cfg.out.join("manifest.jsonl"))
}

pub fn train(cfg: &RunConfig) -> Result<PathBuf> {
    let corpus = required(&cfg.train.corpus, "train.corpus")?;
    prepare_out(cfg)?;
    let mics = cfg.model.mics;
    let train_utts = restrict_mics(load_corpus(corpus, false)?, mics)?;
    let train_set = prepare_examples(&train_utts, &cfg.model, &cfg.stft)?;
    let valid_set = match &cfg.train.valid_corpus {
        Some(v) => prepare_examples(&restrict_mics(load_corpus(v, false)?, mics)?, &cfg.model, &cfg.stft)?,
        None => {
            warn!("no validation corpus; the plateau schedule watches the training loss");
            train_set.clone()
        }
    };
    if train_set.is_empty() {
        return Err(CliError::Input(format!("{} holds no scenes", corpus.display())));
    }
    let mut model = Model::new(cfg.model.clone(), cfg.seed)?;
    info!(
        "training {} ({} parameters) on {} utterances, {} epochs",
        cfg.model.bf_type.name(),
        model.num_params(),
        train_set.len(),
        cfg.train.settings.epochs
    );
    let outcome = run_training(&mut model, &train_set, &valid_set, &cfg.train.settings)?;
    let best = cfg.out.join("model.ckpt");
    write_checkpoint(&best, &outcome.best).map_err(|e| CliError::Output(e.to_string()))?;
    write_checkpoint(cfg.out.join("last.ckpt"), &model.to_checkpoint()).map_err(|e| CliError::Output(e.to_string()))?;
    write_loss_curve(cfg.out.join("loss_curve.jsonl"), &outcome.curve).map_err(|e| CliError::Output(e.to_string()))?;
    info!("best validation loss {:.5} at epoch {}", outcome.best_loss, outcome.best_epoch);
    Ok(best)
}

pub fn enhance(cfg: &RunConfig) -> Result<PathBuf> {
    let ckpt = required(&cfg.enhance.checkpoint, "enhance.checkpoint")?;
    let input = required(&cfg.enhance.input, "enhance.input")?;
    let model = load_model(ckpt)?;
    let wave = read_wav(input)?;
    require_sample_rate(&wave, cfg.corpus.sample_rate)?;
    let mics = model.config().mics;
    if wave.num_channels() != mics {
        return Err(CliError::Input(format!(
            "{} has {} channels, model expects {mics}",
            input.display(),
            wave.num_channels()
        )));
    }
    prepare_out(cfg)?;
    let enhanced = enhance_wave(&model, &wave, &cfg.stft)?;
    if enhanced.channels().iter().flatten().any(|x| !x.is_finite()) {
        return Err(CliError::Numerical("enhanced signal is not finite".into()));
    }
    let path = cfg.out.join(&cfg.enhance.output);
    output(write_wav(&path, &enhanced, SampleFormat::Float32))?;
    info!("wrote {}", path.display());
    Ok(path)
}

pub fn evaluate(cfg: &RunConfig) -> Result<PathBuf> {
    let corpus = required(&cfg.evaluate.corpus, "evaluate.corpus")?;
    let ev = &cfg.evaluate;
    let model = match ev.system {
        SystemKind::Model => Some(load_model(required(&ev.checkpoint, "evaluate.checkpoint")?)?),
        _ => None,
    };
    let needs_images = ev.oracle || ev.system == SystemKind::OracleMvdr;
    prepare_out(cfg)?;
    let mut utts = load_corpus(corpus, needs_images)?;
    if let Some(m) = &model {
        utts = restrict_mics(utts, m.config().mics)?;
    }
    let system = match (&model, ev.system) {
        (Some(m), _) => System::Model(m),
        (None, SystemKind::OracleMvdr) => System::OracleMvdr,
        (None, SystemKind::Identity) => System::Identity,
        (None, _) => System::OracleTarget,
    };
    let opts = EvalOptions { stft: cfg.stft.clone(), with_oracle: ev.oracle };
    let rows = run_evaluation(system, &utts, &opts)?;
    write_metrics(cfg.out.join("metrics.jsonl"), &rows).map_err(|e| CliError::Output(e.to_string()))?;
    let table = render_table(&system.name(), &summarize(&rows));
    write_text(&cfg.out.join("summary.txt"), &table)?;
    print!("{table}");
    if ev.dump_audio {
        let dir = cfg.out.join("audio");
        create_dir(&dir)?;
        for u in &utts {
            let y = eabnet_train::enhance_utterance(system, u, &cfg.stft)?;
            output(write_wav(dir.join(format!("{:06}.wav", u.id)), &y, SampleFormat::Float32))?;
        }
    }
    Ok(cfg.out.join("metrics.jsonl"))
}

#[derive(Serialize)]
struct RirDump<'a> {
    index: usize,
    seed: u64,
    scene: &'a eabnet_room::SceneSpec,
    taps: usize,
}

pub fn rir(cfg: &RunConfig) -> Result<PathBuf> {
    let index = cfg.rir.index;
    let seed = scene_seed(cfg.seed, index as u64);
    let scene = sample_scene(&cfg.corpus.sampler, seed)?;
    prepare_out(cfg)?;
    let opts = RirOptions { sample_rate: cfg.corpus.sample_rate, fractional: cfg.corpus.fractional_delay, ..Default::default() };
    let mut taps = 0;
    for (name, source) in [("speech", &scene.speech_position), ("noise", &scene.noise_position)] {
        let set = image_method_rir(&scene.room, &scene.array, source, &opts)?;
        taps = taps.max(set.impulse_responses.iter().map(Vec::len).max().unwrap_or(0));
        let wave = WaveBuffer::new(set.impulse_responses, set.sample_rate)?;
        output(write_wav(cfg.out.join(format!("rir_{name}.wav")), &wave, SampleFormat::Float32))?;
    }
    let path = cfg.out.join("scene.json");
    write_json(&path, &RirDump { index, seed, scene: &scene, taps })?;
    Ok(path)
}
