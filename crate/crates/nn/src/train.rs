//! Epoch loop with seeded shuffling, optional DP-SGD and early stopping on
//! held-out accuracy.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::accountant::PrivacySpend;
use crate::backward::{BatchStats, Sample};
use crate::dp::{dp_sgd_step, sgd_step, DpSgdConfig};
use crate::error::{NnError, Result};
use crate::forward::{argmax_class, forward_plain};
use crate::graph::ModelGraph;
use crate::ops::softmax_cross_entropy;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacyConfig {
    pub l2_norm_clip: f64,
    pub noise_multiplier: f64,
    pub microbatches: usize,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Epochs without held-out improvement before stopping.
    pub patience: usize,
    pub privacy: Option<PrivacyConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 30, batch_size: 32, learning_rate: 0.05, seed: 0, patience: 5, privacy: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: f64,
    pub accuracy: f64,
    /// Cumulative epsilon; infinite for non-private training.
    pub epsilon: f64,
}

impl EpochMetrics {
    pub const CSV_HEADER: &'static str = "epoch,split,loss,accuracy,epsilon";
}

impl fmt::Display for EpochMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eps = if self.epsilon.is_finite() { format!("{:.6}", self.epsilon) } else { "inf".into() };
        write!(f, "{},{},{:.6},{:.6},{}", self.epoch, self.split, self.loss, self.accuracy, eps)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Checkpoint with the best held-out accuracy (the last one when there
    /// is no held-out set).
    pub model: ModelGraph,
    pub best_epoch: usize,
    pub log: Vec<EpochMetrics>,
    pub spend: PrivacySpend,
    pub delta: Option<f64>,
}

impl TrainOutcome {
    pub fn epsilon(&self) -> Result<f64> {
        match self.delta {
            Some(d) => self.spend.epsilon(d),
            None => Ok(f64::INFINITY),
        }
    }
}

/// Mean loss and accuracy over `samples`.
pub fn evaluate(model: &ModelGraph, samples: &[Sample]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(NnError::Config("cannot evaluate on an empty set".into()));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in samples {
        let scores = forward_plain(model, &s.input)?;
        loss += softmax_cross_entropy(&scores, s.label).0;
        correct += usize::from(argmax_class(&scores)? == s.label);
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn train(
    mut model: ModelGraph,
    train_set: &[Sample],
    held_out: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(NnError::Config("empty training set".into()));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(NnError::Config("batch size and learning rate must be positive".into()));
    }
    let dp = match cfg.privacy {
        Some(p) => {
            let c = DpSgdConfig {
                learning_rate: cfg.learning_rate,
                l2_norm_clip: p.l2_norm_clip,
                noise_multiplier: p.noise_multiplier,
                microbatches: p.microbatches,
                batch_size: cfg.batch_size,
                population: train_set.len(),
                delta: p.delta,
            };
            c.validate()?;
            Some(c)
        }
        None => None,
    };
    model.validate()?;
    let mut order_rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut noise_rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(1);
    let mut spend = PrivacySpend::new(dp.map_or(0.0, |c| c.noise_multiplier));
    let mut log = Vec::new();
    let mut best = (model.clone(), f64::NEG_INFINITY, 0usize);
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut totals = BatchStats::default();
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<Sample> = idx.iter().map(|&i| train_set[i].clone()).collect();
            let stats = match &dp {
                Some(c) if batch.len() % c.microbatches != 0 => continue,
                Some(c) => dp_sgd_step(&mut model, &batch, c, &mut noise_rng, &mut spend)?,
                None => sgd_step(&mut model, &batch, cfg.learning_rate)?,
            };
            totals.loss_sum += stats.loss_sum;
            totals.correct += stats.correct;
            totals.count += stats.count;
        }
        let epsilon = match &dp {
            Some(c) => spend.epsilon(c.delta)?,
            None => f64::INFINITY,
        };
        let n = totals.count.max(1) as f64;
        log.push(EpochMetrics {
            epoch,
            split: "train",
            loss: totals.loss_sum / n,
            accuracy: totals.correct as f64 / n,
            epsilon,
        });
        if held_out.is_empty() {
            best = (model.clone(), 0.0, epoch);
            continue;
        }
        let (loss, accuracy) = evaluate(&model, held_out)?;
        log.push(EpochMetrics { epoch, split: "heldout", loss, accuracy, epsilon });
        if accuracy > best.1 {
            best = (model.clone(), accuracy, epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    if cfg.epochs == 0 {
        best.0 = model;
    }
    Ok(TrainOutcome { model: best.0, best_epoch: best.2, log, spend, delta: dp.map(|c| c.delta) })
}
