use std::collections::HashMap;

use eabnet_tensor::{ParamId, ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 5e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Parameters without a gradient are treated
/// as having a zero gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    lr: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Result<Self> {
        let ok = config.learning_rate >= 0.0
            && (0.0..1.0).contains(&config.beta1)
            && (0.0..1.0).contains(&config.beta2)
            && config.eps > 0.0;
        if !ok {
            return Err(TrainError::Config(format!("adam {config:?}")));
        }
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, p)| vec![0.0; p.value.numel()]).collect();
        Ok(Self { config, lr: config.learning_rate, step: 0, m: zeros.clone(), v: zeros })
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &HashMap<ParamId, Tensor>) -> Result<()> {
        if store.len() != self.m.len() {
            return Err(TrainError::Config(format!(
                "optimiser built for {} parameters, store has {}",
                self.m.len(),
                store.len()
            )));
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..store.len() {
            let id = ParamId(i);
            let grad = grads.get(&id);
            if let Some(g) = grad {
                if g.numel() != self.m[i].len() {
                    return Err(TrainError::Config(format!("gradient size mismatch for {}", store.get(id).name)));
                }
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let value = store.value_mut(id).data_mut();
            for k in 0..value.len() {
                let g = grad.map_or(0.0, |g| g.data()[k]);
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                value[k] -= self.lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Halves the learning rate after `patience` consecutive epochs without a
/// strict improvement of the monitored loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub patience: usize,
    pub factor: f64,
    best: Option<f64>,
    bad_epochs: usize,
}

impl Default for PlateauSchedule {
    fn default() -> Self {
        Self::new(2, 0.5)
    }
}

impl PlateauSchedule {
    pub fn new(patience: usize, factor: f64) -> Self {
        Self { patience: patience.max(1), factor, best: None, bad_epochs: 0 }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn bad_epochs(&self) -> usize {
        self.bad_epochs
    }

    /// Records one epoch's loss and returns the new learning rate together
    /// with whether it was reduced.
    pub fn observe(&mut self, loss: f64, lr: f64) -> (f64, bool) {
        match self.best {
            Some(best) if !(loss < best) => {
                self.bad_epochs += 1;
                if self.bad_epochs >= self.patience {
                    self.bad_epochs = 0;
                    return (lr * self.factor, true);
                }
            }
            _ => {
                self.best = Some(loss);
                self.bad_epochs = 0;
            }
        }
        (lr, false)
    }
}
