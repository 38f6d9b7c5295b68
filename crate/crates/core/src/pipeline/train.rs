use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gnn::Emulator;
use crate::ndnn::{adam_step, AdamConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle.
    #[serde(default)]
    pub seed: u64,
}

fn default_lr() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    400
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_batch() -> usize {
    1
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: default_lr(),
            epochs: default_epochs(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            batch_size: default_batch(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && self.batch_size > 0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid training settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean validation loss, or `None` without a validation set.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (0 means the initial ones).
    pub best_epoch: usize,
    pub best_loss: f64,
}

/// Mean loss over `indices`.
pub fn mean_loss<M: Emulator + Sync>(model: &M, dataset: &Dataset, indices: &[usize]) -> Result<f64> {
    use rayon::prelude::*;
    let losses: Vec<f64> = indices
        .par_iter()
        .map(|&k| model.loss(&dataset.input(k), &dataset.samples[k].targets))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / indices.len().max(1) as f64)
}

/// Adam on the per-sample MSE, averaging gradients over mini-batches.
///
/// The sample order is reshuffled every epoch from `config.seed`. The
/// parameters with the lowest validation loss (training loss if `val` is
/// empty) are restored at the end.
pub fn train<M: Emulator + Sync + Clone>(
    model: &mut M,
    dataset: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainHistory> {
    config.validate()?;
    if train_idx.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    let adam = config.adam();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order = train_idx.to_vec();
    let mut records = Vec::with_capacity(config.epochs);
    let initial = if val_idx.is_empty() {
        mean_loss(model, dataset, train_idx)?
    } else {
        mean_loss(model, dataset, val_idx)?
    };
    let mut best = (0, initial, model.clone());

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            model.zero_grad();
            for &k in batch {
                let loss = model.loss_and_backward(&dataset.input(k), &dataset.samples[k].targets)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, loss });
                }
                total += loss;
            }
            let scale = 1.0 / batch.len() as f64;
            let mut params = model.params_mut();
            if batch.len() > 1 {
                for p in params.iter_mut() {
                    p.grad *= scale;
                }
            }
            adam_step(&mut params, &adam).map_err(|_| Error::Divergence {
                epoch,
                loss: f64::NAN,
            })?;
        }
        let train_loss = total / order.len() as f64;
        let val_loss = if val_idx.is_empty() {
            None
        } else {
            Some(mean_loss(model, dataset, val_idx)?)
        };
        let score = val_loss.unwrap_or(train_loss);
        if !score.is_finite() {
            return Err(Error::Divergence { epoch, loss: score });
        }
        if score < best.1 {
            best = (epoch, score, model.clone());
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
        };
        progress(&record);
        records.push(record);
    }
    let (best_epoch, best_loss, best_model) = best;
    *model = best_model;
    Ok(TrainHistory {
        records,
        best_epoch,
        best_loss,
    })
}
