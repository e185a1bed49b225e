//! Differentially-private SGD: per-microbatch clipping plus Gaussian noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::accountant::PrivacySpend;
use crate::backward::{backward_with_stats, BatchStats, Gradients, Sample};
use crate::error::{NnError, Result};
use crate::graph::ModelGraph;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DpSgdConfig {
    pub learning_rate: f64,
    /// Clipping norm `C`; may be infinite.
    pub l2_norm_clip: f64,
    /// Noise standard deviation relative to `C`.
    pub noise_multiplier: f64,
    pub microbatches: usize,
    pub batch_size: usize,
    /// Training set size `N`.
    pub population: usize,
    pub delta: f64,
}

impl DpSgdConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(NnError::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.l2_norm_clip > 0.0) {
            return fail(format!("clipping norm {} must be positive", self.l2_norm_clip));
        }
        if !(self.noise_multiplier >= 0.0 && self.noise_multiplier.is_finite()) {
            return fail(format!("noise multiplier {} must be non-negative", self.noise_multiplier));
        }
        if self.microbatches == 0 || self.batch_size == 0 || self.batch_size % self.microbatches != 0 {
            return fail(format!("{} microbatches do not divide a batch of {}", self.microbatches, self.batch_size));
        }
        if self.population < self.batch_size {
            return fail(format!("batch of {} exceeds the training set of {}", self.batch_size, self.population));
        }
        if !(self.delta > 0.0 && self.delta < 1.0 / self.population as f64) {
            return fail(format!("delta {} must lie in (0, 1/{})", self.delta, self.population));
        }
        Ok(())
    }
}

/// Rescales `g` to norm `c` if it is longer; otherwise returns it unchanged.
pub fn clip_gradient(g: &Gradients, c: f64) -> Gradients {
    let norm = g.l2_norm();
    let mut out = g.clone();
    if norm > c {
        out.scale(c / norm);
    }
    out
}

pub(crate) fn apply_update(model: &mut ModelGraph, g: &Gradients, learning_rate: f64) {
    for (name, t) in &mut model.weights {
        for (p, d) in t.data.iter_mut().zip(&g.tensors[name]) {
            *p -= learning_rate * d;
        }
    }
}

/// Plain minibatch SGD on the mean gradient.
pub fn sgd_step(model: &mut ModelGraph, batch: &[Sample], learning_rate: f64) -> Result<BatchStats> {
    let (mut grads, stats) = backward_with_stats(model, batch, 1)?;
    apply_update(model, &grads.pop().unwrap(), learning_rate);
    Ok(stats)
}

/// One DP-SGD update: clip each microbatch mean gradient to the clipping
/// norm, sum, add `N(0, (sigma C)^2)` noise per coordinate, divide by the
/// number of microbatches and step. Records the step in `spend`.
pub fn dp_sgd_step<R: Rng + ?Sized>(
    model: &mut ModelGraph,
    batch: &[Sample],
    cfg: &DpSgdConfig,
    rng: &mut R,
    spend: &mut PrivacySpend,
) -> Result<BatchStats> {
    if cfg.microbatches == 0 || batch.len() % cfg.microbatches != 0 {
        return Err(NnError::Config(format!(
            "{} microbatches do not divide a batch of {}",
            cfg.microbatches,
            batch.len()
        )));
    }
    let (micro, stats) = backward_with_stats(model, batch, cfg.microbatches)?;
    let mut total = clip_gradient(&micro[0], cfg.l2_norm_clip);
    for g in &micro[1..] {
        total.add_assign(&clip_gradient(g, cfg.l2_norm_clip));
    }
    if cfg.noise_multiplier > 0.0 {
        let std = cfg.noise_multiplier * cfg.l2_norm_clip;
        let normal = Normal::new(0.0, std).map_err(|e| NnError::Config(format!("noise scale {std}: {e}")))?;
        for v in total.tensors.values_mut().flat_map(|v| v.iter_mut()) {
            *v += normal.sample(rng);
        }
    }
    total.divide(cfg.microbatches as f64);
    apply_update(model, &total, cfg.learning_rate);
    spend.noise_multiplier = cfg.noise_multiplier;
    spend.record_step();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn grads(v: Vec<f64>) -> Gradients {
        Gradients { tensors: BTreeMap::from([("w".to_string(), v)]) }
    }

    #[test]
    fn clip_shrinks_long_vectors_only() {
        let g = grads(vec![3.0, 4.0]);
        assert_eq!(clip_gradient(&g, 10.0), g);
        let c = clip_gradient(&g, 1.0);
        assert!((c.l2_norm() - 1.0).abs() < 1e-15);
        assert!((c.tensors["w"][0] - 0.6).abs() < 1e-15);
        assert_eq!(clip_gradient(&g, f64::INFINITY), g);
    }

    #[test]
    fn config_validation() {
        let good = DpSgdConfig {
            learning_rate: 0.1,
            l2_norm_clip: 1.0,
            noise_multiplier: 1.1,
            microbatches: 4,
            batch_size: 32,
            population: 1000,
            delta: 1e-5,
        };
        assert!(good.validate().is_ok());
        assert!(DpSgdConfig { microbatches: 5, ..good }.validate().is_err());
        assert!(DpSgdConfig { delta: 1e-2, ..good }.validate().is_err());
        assert!(DpSgdConfig { noise_multiplier: -1.0, ..good }.validate().is_err());
        assert!(DpSgdConfig { population: 16, ..good }.validate().is_err());
    }
}
