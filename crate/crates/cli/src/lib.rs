//! The `eabnet` command line: simulate corpora, train, enhance, evaluate
//! and dump room impulse responses, all driven by one TOML configuration.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{split_override, RunConfig, SystemKind};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "eabnet", version = env!("CARGO_PKG_VERSION"), about = "Causal neural beamforming with EaBNet")]
pub struct Cli {
    /// TOML configuration; every field has a default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set train.settings.epochs=3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a reverberant multichannel corpus.
    Simulate {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train a model on a simulated corpus.
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        valid_corpus: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Enhance one multichannel 16 kHz WAV file.
    Enhance {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Score a system on a corpus.
    Evaluate {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_enum)]
        system: Option<SystemArg>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write the impulse responses of one sampled scene.
    Rir {
        #[arg(long)]
        index: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SystemArg {
    Model,
    OracleMvdr,
    Identity,
    OracleTarget,
}

impl From<SystemArg> for SystemKind {
    fn from(s: SystemArg) -> Self {
        match s {
            SystemArg::Model => SystemKind::Model,
            SystemArg::OracleMvdr => SystemKind::OracleMvdr,
            SystemArg::Identity => SystemKind::Identity,
            SystemArg::OracleTarget => SystemKind::OracleTarget,
        }
    }
}

impl Cli {
    /// Builds the effective configuration: file, then `--set`, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let overrides = self.set.iter().map(|s| split_override(s)).collect::<Result<Vec<_>>>()?;
        let mut cfg = RunConfig::load(self.config.as_deref(), &overrides)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        match &self.command {
            Command::Simulate { count } => {
                if let Some(c) = count {
                    cfg.corpus.count = *c;
                }
            }
            Command::Train { corpus, valid_corpus, epochs } => {
                if corpus.is_some() {
                    cfg.train.corpus = corpus.clone();
                }
                if valid_corpus.is_some() {
                    cfg.train.valid_corpus = valid_corpus.clone();
                }
                if let Some(e) = epochs {
                    cfg.train.settings.epochs = *e;
                }
            }
            Command::Enhance { checkpoint, input } => {
                if checkpoint.is_some() {
                    cfg.enhance.checkpoint = checkpoint.clone();
                }
                if input.is_some() {
                    cfg.enhance.input = input.clone();
                }
            }
            Command::Evaluate { corpus, system, checkpoint } => {
                if corpus.is_some() {
                    cfg.evaluate.corpus = corpus.clone();
                }
                if let Some(s) = system {
                    cfg.evaluate.system = (*s).into();
                }
                if checkpoint.is_some() {
                    cfg.evaluate.checkpoint = checkpoint.clone();
                }
            }
            Command::Rir { index } => {
                if let Some(i) = index {
                    cfg.rir.index = *i;
                }
            }
        }
        cfg.sync_seeds();
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one command and returns its main output file.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    let cfg = cli.resolve()?;
    let work = || match cli.command {
        Command::Simulate { .. } => commands::simulate(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Enhance { .. } => commands::enhance(&cfg),
        Command::Evaluate { .. } => commands::evaluate(&cfg),
        Command::Rir { .. } => commands::rir(&cfg),
    };
    if cfg.threads == 0 {
        return work();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(work)
}
