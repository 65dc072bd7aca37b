use std::fs;
use std::path::{Path, PathBuf};

use eabnet_dsp::StftConfig;
use eabnet_model::ModelConfig;
use eabnet_room::CorpusConfig;
use eabnet_train::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    #[default]
    Model,
    OracleMvdr,
    Identity,
    OracleTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Corpus directory holding `manifest.jsonl`.
    pub corpus: Option<PathBuf>,
    pub valid_corpus: Option<PathBuf>,
    pub settings: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { corpus: None, valid_corpus: None, settings: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhanceSection {
    pub checkpoint: Option<PathBuf>,
    pub input: Option<PathBuf>,
    /// File name under the output directory.
    pub output: String,
}

impl Default for EnhanceSection {
    fn default() -> Self {
        Self { checkpoint: None, input: None, output: "enhanced.wav".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub corpus: Option<PathBuf>,
    pub system: SystemKind,
    pub checkpoint: Option<PathBuf>,
    /// Also score the oracle MVDR (needs a corpus written by `simulate`).
    pub oracle: bool,
    /// Write every enhanced utterance under `audio/`.
    pub dump_audio: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { corpus: None, system: SystemKind::Model, checkpoint: None, oracle: true, dump_audio: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RirSection {
    /// Scene index drawn from the corpus sampler under `seed`.
    pub index: usize,
}

/// Everything a command needs. Loaded from TOML, then patched with
/// command-line overrides, then validated before any work starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed: corpus scenes, model initialisation, batch shuffling.
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads for scene-parallel work; 0 lets rayon decide.
    pub threads: usize,
    pub stft: StftConfig,
    pub corpus: CorpusConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub enhance: EnhanceSection,
    pub evaluate: EvaluateSection,
    pub rir: RirSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            threads: 0,
            stft: StftConfig::default(),
            corpus: CorpusConfig { duration_secs: 2.0, ..CorpusConfig::default() },
            model: ModelConfig::default(),
            train: TrainSection::default(),
            enhance: EnhanceSection::default(),
            evaluate: EvaluateSection::default(),
            rir: RirSection::default(),
        }
    }
}

/// Parses an override value as a TOML literal, falling back to a string.
fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets `a.b.c = value`, creating intermediate tables.
pub fn apply_override(table: &mut Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let (last, path) = parts.split_last().expect("non-empty");
    let mut cur = table;
    for p in path {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key}: {p} is not a table")))?;
    }
    cur.insert(last.to_string(), parse_value(raw));
    Ok(())
}

/// Splits `KEY=VALUE`.
pub fn split_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Config(format!("override {s:?} is not KEY=VALUE")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl RunConfig {
    /// Reads `path` (or starts empty), applies overrides in order and
    /// deserialises with defaults for everything unspecified.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let mut cfg: RunConfig =
            Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.sync_seeds();
        Ok(cfg)
    }

    /// Propagates the master seed into the sections that consume it.
    pub fn sync_seeds(&mut self) {
        self.corpus.seed = self.seed;
        self.train.settings.shuffle_seed = self.seed;
    }

    /// Checks that apply to every command.
    pub fn validate(&self) -> Result<()> {
        // TOML integers are signed, and the effective config is echoed as TOML.
        if i64::try_from(self.seed).is_err() {
            return Err(CliError::Config(format!("seed {} exceeds {}", self.seed, i64::MAX)));
        }
        self.stft.validate().map_err(|e| CliError::Config(format!("stft: {e}")))?;
        self.corpus.validate().map_err(|e| CliError::Config(format!("corpus: {e}")))?;
        self.model.validate()?;
        self.train.settings.validate()?;
        let bins = self.stft.fft_size / 2 + 1;
        if bins != self.model.freq_bins {
            return Err(CliError::Config(format!(
                "stft gives {bins} bins but model.freq_bins is {}",
                self.model.freq_bins
            )));
        }
        if self.corpus.sample_rate != 16_000 {
            return Err(CliError::Config(format!("sample rate {} (pipeline runs at 16 kHz)", self.corpus.sample_rate)));
        }
        let name = Path::new(&self.enhance.output);
        if name.components().count() != 1 || name.is_absolute() {
            return Err(CliError::Config(format!("enhance.output {:?} must be a plain file name", self.enhance.output)));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_are_typed() {
        let ov = [
            ("train.settings.epochs".to_string(), "3".to_string()),
            ("model.bf_type".to_string(), "C-BF".to_string()),
            ("corpus.duration_secs".to_string(), "0.5".to_string()),
            ("seed".to_string(), "9".to_string()),
        ];
        let cfg = RunConfig::load(None, &ov).unwrap();
        assert_eq!(cfg.train.settings.epochs, 3);
        assert_eq!(cfg.model.bf_type, eabnet_model::BfType::CBf);
        assert_eq!(cfg.corpus.duration_secs, 0.5);
        assert_eq!((cfg.corpus.seed, cfg.train.settings.shuffle_seed), (9, 9));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let ov = [("train.settings.epoch".to_string(), "3".to_string())];
        assert!(matches!(RunConfig::load(None, &ov), Err(CliError::Config(_))));
        assert!(split_override("novalue").is_err());
        assert!(apply_override(&mut Table::new(), "a..b", "1").is_err());
    }

    #[test]
    fn inconsistent_bins_fail_validation() {
        let ov = [("model.freq_bins".to_string(), "257".to_string())];
        let cfg = RunConfig::load(None, &ov).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let cfg = RunConfig { seed: u64::MAX, ..RunConfig::default() };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }
}
