//! Training and evaluation for EaBNet: the spectral loss, Adam with a
//! plateau schedule, SI-SNR/SNR metrics, and the desk-scale harness that
//! ties corpora, models and oracle beamformers together.

mod data;
mod error;
mod eval;
mod loss;
mod metrics;
mod optim;
mod trainer;

pub use data::{load_from_disk, load_regenerated, prepare_examples, Example, Utterance};
pub use error::{Result, TrainError};
pub use eval::{
    enhance_utterance, enhance_wave, evaluate, render_table, summarize, write_metrics, BucketSummary, EvalOptions, MetricsRow,
    Score, System, METRICS_SCHEMA, METRICS_VERSION, SNR_BUCKETS,
};
pub use loss::{loss_report, loss_var, LossReport, LossWeights};
pub use metrics::{si_snr, snr, SATURATION_DB};
pub use optim::{Adam, AdamConfig, PlateauSchedule};
pub use trainer::{
    mean_loss, stack_batch, train, write_loss_curve, EpochRecord, TrainConfig, TrainOutcome, LOSS_CURVE_SCHEMA,
    LOSS_CURVE_VERSION,
};
