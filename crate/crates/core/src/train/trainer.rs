use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::bptt::{backward, BackwardOptions, Gradients};
use super::loss::bce_loss;
use crate::data::{FrameCounts, Sample, Splits, THRESHOLD};
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Weight decay; the gradient receives `l2·W` before every update.
    pub l2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Sequences per update; their gradients are summed.
    pub batch_size: usize,
    pub seed: u64,
    pub truncation_window: Option<usize>,
    /// Rescale the summed gradient to at most this global norm.
    pub clip_norm: Option<f64>,
    /// Matrix names that receive no updates.
    pub frozen: Vec<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            l2: 0.0,
            max_epochs: 100,
            patience: 10,
            batch_size: 1,
            seed: 0,
            truncation_window: None,
            clip_norm: None,
            frozen: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidInput(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if self.patience == 0 {
            return Err(Error::InvalidInput("patience must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch_size must be at least 1".into()));
        }
        if self.truncation_window == Some(0) {
            return Err(Error::InvalidInput("truncation_window must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::InvalidInput(format!("clip_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 0 is the untrained model.
    pub epoch: usize,
    /// Mean per-sequence loss over the epoch, without the L2 term.
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub elapsed_seconds: f64,
    /// Updates whose gradient was rescaled by `clip_norm`.
    pub clipped_updates: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

impl History {
    /// `epoch,train_loss,val_accuracy,elapsed_seconds`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_accuracy,elapsed_seconds\n");
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, r.val_accuracy, r.elapsed_seconds).unwrap();
        }
        out
    }

    /// Records with timing removed, for determinism comparisons.
    pub fn untimed(&self) -> Vec<(usize, f64, f64)> {
        self.records.iter().map(|r| (r.epoch, r.train_loss, r.val_accuracy)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the best validation accuracy seen.
    pub best: Model,
    pub history: History,
}

/// Global-sum frame accuracy of `model` over `samples`.
pub fn evaluate_accuracy(model: &Model, samples: &[Sample]) -> Result<f64> {
    let mut counts = FrameCounts::default();
    for sample in samples {
        let y = model.predict(&sample.inputs)?;
        counts.add(&y, &sample.targets, THRESHOLD)?;
    }
    Ok(counts.accuracy())
}

/// Mean per-sequence data loss.
pub fn mean_loss(model: &Model, samples: &[Sample]) -> Result<f64> {
    let mut total = 0.0;
    for sample in samples {
        total += bce_loss(&model.predict(&sample.inputs)?, &sample.targets)?;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Adam on shuffled training sequences with early stopping on validation
/// frame accuracy.
///
/// The untrained model is recorded as epoch 0. Training stops after
/// `patience` consecutive epochs without a strict improvement or after
/// `max_epochs`.
pub fn train_loop(init: Model, splits: &Splits, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if splits.train.is_empty() || splits.valid.is_empty() {
        return Err(Error::InvalidInput("training needs non-empty train and valid splits".into()));
    }
    let names = init.names();
    if let Some(bad) = config.frozen.iter().find(|f| !names.contains(f)) {
        return Err(Error::InvalidInput(format!(
            "frozen matrix '{bad}' does not exist (model has {})",
            names.join(", ")
        )));
    }

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = init;
    let mut adam = AdamState::new(&model.matrices());
    let opts = BackwardOptions {
        l2: 0.0,
        truncation_window: config.truncation_window,
    };

    let initial_acc = evaluate_accuracy(&model, &splits.valid).map_err(|e| e.context("epoch 0 validation"))?;
    let mut history = History {
        records: vec![EpochRecord {
            epoch: 0,
            train_loss: mean_loss(&model, &splits.train).map_err(|e| e.context("epoch 0 train loss"))?,
            val_accuracy: initial_acc,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            clipped_updates: 0,
        }],
        best_epoch: 0,
        best_val_accuracy: initial_acc,
    };
    let mut best = model.clone();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..splits.train.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut clipped = 0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros_like(&model);
            for &idx in batch {
                let sample = &splits.train[idx];
                let (loss, g) = backward(&model, &sample.inputs, &sample.targets, &opts)
                    .map_err(|e| e.context(format!("epoch {epoch}, sequence {idx}")))?;
                loss_sum += loss;
                grads.add_assign(&g);
            }
            if let Some(limit) = config.clip_norm {
                let norm = grads.global_norm();
                if norm > limit {
                    grads.scale(limit / norm);
                    clipped += 1;
                }
            }
            adam_step(&mut adam, &mut model.matrices_mut(), &grads, config);
            if model.matrices().iter().any(|m| !m.is_finite()) {
                return Err(Error::NonFinite {
                    context: "parameters after update".into(),
                    timestep: 0,
                }
                .context(format!("epoch {epoch}")));
            }
        }
        let val_accuracy =
            evaluate_accuracy(&model, &splits.valid).map_err(|e| e.context(format!("epoch {epoch} validation")))?;
        history.records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / splits.train.len() as f64,
            val_accuracy,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            clipped_updates: clipped,
        });
        if val_accuracy > history.best_val_accuracy {
            history.best_val_accuracy = val_accuracy;
            history.best_epoch = epoch;
            best = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome { best, history })
}
