use std::collections::HashMap;
use std::path::Path;

use eabnet_io::{write_records, SchemaHeader};
use eabnet_model::Model;
use eabnet_tensor::{backward, no_grad, Checkpoint, ParamId, Tensor, Var};
use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::{Result, TrainError};
use crate::loss::{loss_var, LossReport, LossWeights};
use crate::optim::{Adam, AdamConfig, PlateauSchedule};

pub const LOSS_CURVE_SCHEMA: &str = "eabnet.loss_curve";
pub const LOSS_CURVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub loss: LossWeights,
    /// Epochs without improvement before the learning rate is halved.
    pub plateau_patience: usize,
    pub lr_factor: f64,
    pub shuffle_seed: u64,
    /// Compute each batch item's gradient on its own rayon task and sum
    /// them in item order.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 2,
            adam: AdamConfig::default(),
            loss: LossWeights::default(),
            plateau_patience: 2,
            lr_factor: 0.5,
            shuffle_seed: 0,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor <= 1.0) {
            return Err(TrainError::Config(format!("lr_factor {}", self.lr_factor)));
        }
        Ok(())
    }
}

/// One line of the loss curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossReport,
    pub valid: Option<LossReport>,
    /// Learning rate used during this epoch.
    pub learning_rate: f64,
    pub lr_halved: bool,
    pub best: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub curve: Vec<EpochRecord>,
    /// Epoch (1-based) with the lowest monitored loss; 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_loss: f64,
    /// Parameters at the best epoch.
    pub best: Checkpoint,
}

/// Concatenates `1 × …` tensors along the batch axis.
pub fn stack_batch(items: &[&Tensor]) -> Result<Tensor> {
    let first = items.first().ok_or_else(|| TrainError::Data("empty batch".into()))?;
    let inner = &first.shape()[1..];
    let mut data = Vec::with_capacity(first.numel() * items.len());
    let mut n = 0;
    for t in items {
        if &t.shape()[1..] != inner {
            return Err(TrainError::Data(format!(
                "batch items differ in shape: {:?} vs {:?}",
                first.shape(),
                t.shape()
            )));
        }
        n += t.shape()[0];
        data.extend_from_slice(t.data());
    }
    let mut shape = vec![n];
    shape.extend_from_slice(inner);
    Ok(Tensor::new(shape, data)?)
}

fn batch_loss(model: &Model, params: &[Var], input: &Tensor, target: &Tensor, w: LossWeights) -> Result<(Var, LossReport)> {
    let out = model.forward_with(params, input)?;
    loss_var(&out.enhanced, &Var::constant(target.clone()), w)
}

type Grads = HashMap<ParamId, Tensor>;

fn batch_gradients(model: &Model, batch: &[&Example], cfg: &TrainConfig) -> Result<(LossReport, Grads)> {
    let single = |items: &[&Example]| -> Result<(LossReport, Grads)> {
        let input = stack_batch(&items.iter().map(|e| &e.input).collect::<Vec<_>>())?;
        let target = stack_batch(&items.iter().map(|e| &e.target).collect::<Vec<_>>())?;
        let params = model.param_vars();
        let (loss, report) = batch_loss(model, &params, &input, &target, cfg.loss)?;
        if !report.total.is_finite() {
            return Ok((report, Grads::new()));
        }
        Ok((report, backward(&loss)?.into_params()))
    };
    if !cfg.parallel || batch.len() == 1 {
        return single(batch);
    }
    let parts: Vec<(LossReport, Grads)> =
        batch.par_iter().map(|e| single(std::slice::from_ref(e))).collect::<Result<_>>()?;
    let k = parts.len() as f64;
    let mut report = LossReport::default();
    let mut grads = Grads::new();
    for (r, g) in &parts {
        report.total += r.total / k;
        report.ri_term += r.ri_term / k;
        report.mag_term += r.mag_term / k;
        let mut ids: Vec<_> = g.keys().copied().collect();
        ids.sort();
        for id in ids {
            let entry = grads.entry(id).or_insert_with(|| Tensor::zeros(g[&id].shape().to_vec()));
            for (acc, v) in entry.data_mut().iter_mut().zip(g[&id].data()) {
                *acc += v / k;
            }
        }
    }
    Ok((report, grads))
}

/// Mean loss over a set of examples, one forward pass each.
pub fn mean_loss(model: &Model, examples: &[Example], w: LossWeights) -> Result<LossReport> {
    if examples.is_empty() {
        return Err(TrainError::Data("no examples".into()));
    }
    let params = model.param_vars();
    let mut acc = LossReport::default();
    for e in examples {
        let (_, r) = no_grad(|| batch_loss(model, &params, &e.input, &e.target, w))?;
        acc.total += r.total;
        acc.ri_term += r.ri_term;
        acc.mag_term += r.mag_term;
    }
    let k = examples.len() as f64;
    Ok(LossReport { total: acc.total / k, ri_term: acc.ri_term / k, mag_term: acc.mag_term / k })
}

/// Mini-batch training with per-epoch validation and the plateau schedule.
/// The monitored loss is the validation loss, or the training loss when
/// `valid` is empty. On return `model` holds the final parameters; the
/// best ones are in [`TrainOutcome::best`].
pub fn train(model: &mut Model, train_set: &[Example], valid: &[Example], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::Data("empty training set".into()));
    }
    let mut adam = Adam::new(cfg.adam, model.params())?;
    let mut schedule = PlateauSchedule::new(cfg.plateau_patience, cfg.lr_factor);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best = (0, f64::INFINITY, model.to_checkpoint());

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let lr = adam.learning_rate();
        let mut acc = LossReport::default();
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (report, grads) = batch_gradients(model, &batch, cfg)?;
            if !report.total.is_finite() {
                return Err(TrainError::Diverged { epoch, batch: b + 1, loss: report.total });
            }
            debug!("epoch {epoch} batch {} loss {:.6}", b + 1, report.total);
            adam.step(model.params_mut(), &grads)?;
            let k = chunk.len() as f64;
            acc.total += report.total * k;
            acc.ri_term += report.ri_term * k;
            acc.mag_term += report.mag_term * k;
        }
        let n = train_set.len() as f64;
        let train_report = LossReport { total: acc.total / n, ri_term: acc.ri_term / n, mag_term: acc.mag_term / n };
        let valid_report = if valid.is_empty() { None } else { Some(mean_loss(model, valid, cfg.loss)?) };
        let monitored = valid_report.map_or(train_report.total, |r| r.total);
        if !monitored.is_finite() {
            return Err(TrainError::Diverged { epoch, batch: 0, loss: monitored });
        }
        let is_best = monitored < best.1;
        if is_best {
            best = (epoch, monitored, model.to_checkpoint());
        }
        let (new_lr, halved) = schedule.observe(monitored, lr);
        adam.set_learning_rate(new_lr);
        info!(
            "epoch {epoch}: train {:.6} valid {} lr {lr:e}{}",
            train_report.total,
            valid_report.map_or("-".to_string(), |r| format!("{:.6}", r.total)),
            if halved { " (halved)" } else { "" }
        );
        curve.push(EpochRecord {
            epoch,
            train: train_report,
            valid: valid_report,
            learning_rate: lr,
            lr_halved: halved,
            best: is_best,
        });
    }
    Ok(TrainOutcome { curve, best_epoch: best.0, best_loss: best.1, best: best.2 })
}

pub fn write_loss_curve(path: impl AsRef<Path>, curve: &[EpochRecord]) -> Result<()> {
    Ok(write_records(path, &SchemaHeader::new(LOSS_CURVE_SCHEMA, LOSS_CURVE_VERSION), curve)?)
}
