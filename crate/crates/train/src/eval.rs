use std::fmt::Write as _;
use std::path::Path;

use eabnet_beamform::{oracle_mvdr, SteeringNorm};
use eabnet_dsp::{decompress, istft, stft, StftConfig, WaveBuffer};
use eabnet_io::{write_records, SchemaHeader};
use eabnet_model::{Model, COMPRESSION_EXPONENT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Utterance;
use crate::error::{Result, TrainError};
use crate::metrics::{si_snr, snr, SATURATION_DB};

pub const METRICS_SCHEMA: &str = "eabnet.metrics";
pub const METRICS_VERSION: u32 = 1;

/// Input SNR buckets of the test grid.
pub const SNR_BUCKETS: [f64; 4] = [-5.0, -2.0, 0.0, 2.0];

/// What produces the enhanced signal.
#[derive(Clone, Copy)]
pub enum System<'a> {
    Model(&'a Model),
    /// Oracle-IRM MB-MVDR.
    OracleMvdr,
    /// The noisy reference channel.
    Identity,
    /// The clean target itself.
    OracleTarget,
}

impl System<'_> {
    pub fn name(&self) -> String {
        match self {
            System::Model(m) => format!("eabnet[{}]", m.config().bf_type.name()),
            System::OracleMvdr => "oracle-mvdr".into(),
            System::Identity => "identity".into(),
            System::OracleTarget => "oracle-target".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub stft: StftConfig,
    /// Also score the oracle MVDR on every scene.
    pub with_oracle: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { stft: StftConfig::default(), with_oracle: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub si_snr_db: f64,
    pub snr_db: f64,
    /// Set when either value hit the ±60 dB clamp.
    pub saturated: bool,
}

impl Score {
    pub fn measure(estimate: &[f64], reference: &[f64]) -> Result<Self> {
        let (si_snr_db, snr_db) = (si_snr(estimate, reference)?, snr(estimate, reference)?);
        let saturated = si_snr_db.abs() >= SATURATION_DB || snr_db.abs() >= SATURATION_DB;
        Ok(Self { si_snr_db, snr_db, saturated })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scene: usize,
    pub input_snr_db: f64,
    pub system: String,
    pub noisy: Score,
    pub enhanced: Score,
    pub oracle_mvdr: Option<Score>,
    pub delta_si_snr_db: f64,
    pub delta_snr_db: f64,
}

fn images(u: &Utterance) -> Result<&(WaveBuffer, WaveBuffer)> {
    u.images.as_ref().ok_or_else(|| {
        TrainError::Data(format!("scene {}: oracle MVDR needs the source images; regenerate the corpus", u.id))
    })
}

fn oracle_mvdr_wave(u: &Utterance, cfg: &StftConfig) -> Result<WaveBuffer> {
    let (speech, noise) = images(u)?;
    let out = oracle_mvdr(&stft(&u.mixture, cfg)?, &stft(speech, cfg)?, &stft(noise, cfg)?, SteeringNorm::Reference)?;
    Ok(istft(&out.output, cfg, Some(u.mixture.len()))?)
}

/// Runs `model` on a `P`-channel mixture and returns the enhanced mono
/// waveform at the mixture length (decompressed when the model works in
/// the compressed domain).
pub fn enhance_wave(model: &Model, mixture: &WaveBuffer, cfg: &StftConfig) -> Result<WaveBuffer> {
    let mut spec = model.enhance(&stft(mixture, cfg)?)?;
    if model.config().compression {
        spec = decompress(&spec, COMPRESSION_EXPONENT)?;
    }
    Ok(istft(&spec, cfg, Some(mixture.len()))?)
}

/// Single-channel output of `system` for one utterance, time-aligned with
/// the mixture.
pub fn enhance_utterance(system: System<'_>, u: &Utterance, cfg: &StftConfig) -> Result<WaveBuffer> {
    match system {
        System::Identity => Ok(u.mixture.select_channel(0)),
        System::OracleTarget => Ok(u.target.clone()),
        System::OracleMvdr => oracle_mvdr_wave(u, cfg),
        System::Model(model) => enhance_wave(model, &u.mixture, cfg),
    }
}

fn evaluate_one(system: System<'_>, u: &Utterance, opts: &EvalOptions) -> Result<MetricsRow> {
    let reference = u.target.channel(0);
    let noisy = Score::measure(u.mixture.channel(0), reference)?;
    let enhanced_wave = enhance_utterance(system, u, &opts.stft)?;
    let enhanced = Score::measure(enhanced_wave.channel(0), reference)?;
    let oracle = match (opts.with_oracle, system) {
        (false, _) => None,
        (true, System::OracleMvdr) => Some(enhanced),
        (true, _) => Some(Score::measure(oracle_mvdr_wave(u, &opts.stft)?.channel(0), reference)?),
    };
    Ok(MetricsRow {
        scene: u.id,
        input_snr_db: u.snr_db,
        system: system.name(),
        noisy,
        enhanced,
        oracle_mvdr: oracle,
        delta_si_snr_db: enhanced.si_snr_db - noisy.si_snr_db,
        delta_snr_db: enhanced.snr_db - noisy.snr_db,
    })
}

/// Scores `system` on every utterance, in parallel over scenes. Rows are
/// returned in input order.
pub fn evaluate(system: System<'_>, utts: &[Utterance], opts: &EvalOptions) -> Result<Vec<MetricsRow>> {
    utts.par_iter().map(|u| evaluate_one(system, u, opts)).collect()
}

pub fn write_metrics(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    Ok(write_records(path, &SchemaHeader::new(METRICS_SCHEMA, METRICS_VERSION), rows)?)
}

/// Means over one SNR bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub bucket: String,
    pub scenes: usize,
    pub noisy_si_snr_db: f64,
    pub enhanced_si_snr_db: f64,
    pub oracle_si_snr_db: Option<f64>,
    pub noisy_snr_db: f64,
    pub enhanced_snr_db: f64,
    pub oracle_snr_db: Option<f64>,
    pub delta_si_snr_db: f64,
}

fn bucket_of(snr_db: f64) -> Option<usize> {
    SNR_BUCKETS.iter().position(|b| (b - snr_db).abs() < 1e-9)
}

fn summary(label: String, rows: &[&MetricsRow]) -> BucketSummary {
    let k = rows.len() as f64;
    let mean = |f: &dyn Fn(&MetricsRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / k;
    let oracle = rows.iter().all(|r| r.oracle_mvdr.is_some());
    let oracle_mean = |f: &dyn Fn(&Score) -> f64| oracle.then(|| mean(&|r| f(r.oracle_mvdr.as_ref().unwrap())));
    BucketSummary {
        bucket: label,
        scenes: rows.len(),
        noisy_si_snr_db: mean(&|r| r.noisy.si_snr_db),
        enhanced_si_snr_db: mean(&|r| r.enhanced.si_snr_db),
        oracle_si_snr_db: oracle_mean(&|s| s.si_snr_db),
        noisy_snr_db: mean(&|r| r.noisy.snr_db),
        enhanced_snr_db: mean(&|r| r.enhanced.snr_db),
        oracle_snr_db: oracle_mean(&|s| s.snr_db),
        delta_si_snr_db: mean(&|r| r.delta_si_snr_db),
    }
}

/// Per-bucket means for the grid SNRs (empty buckets are skipped), an
/// `other` row for off-grid scenes, and an `all` row.
pub fn summarize(rows: &[MetricsRow]) -> Vec<BucketSummary> {
    let mut out = Vec::new();
    if rows.is_empty() {
        return out;
    }
    for (i, b) in SNR_BUCKETS.iter().enumerate() {
        let members: Vec<_> = rows.iter().filter(|r| bucket_of(r.input_snr_db) == Some(i)).collect();
        if !members.is_empty() {
            out.push(summary(format!("{b:+} dB"), &members));
        }
    }
    let other: Vec<_> = rows.iter().filter(|r| bucket_of(r.input_snr_db).is_none()).collect();
    if !other.is_empty() {
        out.push(summary("other".into(), &other));
    }
    out.push(summary("all".into(), &rows.iter().collect::<Vec<_>>()));
    out
}

/// Aligned-column text table of bucket means.
pub fn render_table(system: &str, summaries: &[BucketSummary]) -> String {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
    let header = [
        "bucket", "scenes", "noisy SI-SNR", "enh SI-SNR", "mvdr SI-SNR", "Δ SI-SNR", "noisy SNR", "enh SNR", "mvdr SNR",
    ];
    let rows: Vec<[String; 9]> = summaries
        .iter()
        .map(|s| {
            [
                s.bucket.clone(),
                s.scenes.to_string(),
                format!("{:.2}", s.noisy_si_snr_db),
                format!("{:.2}", s.enhanced_si_snr_db),
                opt(s.oracle_si_snr_db),
                format!("{:+.2}", s.delta_si_snr_db),
                format!("{:.2}", s.noisy_snr_db),
                format!("{:.2}", s.enhanced_snr_db),
                opt(s.oracle_snr_db),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = format!("system: {system}\n");
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = w - c.chars().count();
                if i == 0 { format!("{c}{}", " ".repeat(pad)) } else { format!("{}{c}", " ".repeat(pad)) }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  "));
    };
    line(header.to_vec(), &mut out);
    for r in &rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}
