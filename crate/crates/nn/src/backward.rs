//! Reverse-mode gradients of softmax cross-entropy.

use std::collections::BTreeMap;

use crate::error::{NnError, Result};
use crate::forward::{argmax_class, conv_geometry, forward_trace, image_dims};
use crate::graph::{Layer, ModelGraph};
use crate::ops;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub label: usize,
}

/// One gradient value per model parameter, keyed by tensor name.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: BTreeMap<String, Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &ModelGraph) -> Self {
        Gradients { tensors: model.weights.iter().map(|(n, t)| (n.clone(), vec![0.0; t.data.len()])).collect() }
    }

    /// Global L2 norm over all tensors.
    pub fn l2_norm(&self) -> f64 {
        self.tensors.values().flat_map(|v| v.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.tensors.values_mut().flat_map(|v| v.iter_mut()) {
            *v *= factor;
        }
    }

    pub fn divide(&mut self, by: f64) {
        for v in self.tensors.values_mut().flat_map(|v| v.iter_mut()) {
            *v /= by;
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (name, v) in &mut self.tensors {
            let o = &other.tensors[name];
            for (a, b) in v.iter_mut().zip(o) {
                *a += b;
            }
        }
    }

    pub fn num_values(&self) -> usize {
        self.tensors.values().map(Vec::len).sum()
    }
}

/// Adds one example's gradient into `acc`. Returns the loss and whether the
/// prediction was correct.
pub fn accumulate_example(model: &ModelGraph, sample: &Sample, acc: &mut Gradients) -> Result<(f64, bool)> {
    if sample.label > 1 {
        return Err(NnError::Shape(format!("label {} outside {{0, 1}}", sample.label)));
    }
    let shapes = model.arch.shape_trace()?;
    let acts = forward_trace(model, &sample.input)?;
    let scores = acts.last().unwrap();
    let correct = argmax_class(scores)? == sample.label;
    let (loss, mut dy) = ops::softmax_cross_entropy(scores, sample.label);
    for (i, layer) in model.arch.layers.iter().enumerate().rev() {
        let x = &acts[i];
        let need_dx = i > 0;
        dy = match layer {
            Layer::Conv2d { weight, bias, .. } => {
                let g = conv_geometry(layer, shapes[i])?;
                let w = &model.tensor(weight)?.data;
                let mut dw = acc.tensors.remove(weight).unwrap();
                let mut db = acc.tensors.remove(bias).unwrap();
                let dx = ops::conv2d_backward(x, &g, w, &dy, &mut dw, &mut db, need_dx);
                acc.tensors.insert(weight.clone(), dw);
                acc.tensors.insert(bias.clone(), db);
                dx
            }
            Layer::Dense { weight, bias, .. } => {
                let w = &model.tensor(weight)?.data;
                let mut dw = acc.tensors.remove(weight).unwrap();
                let mut db = acc.tensors.remove(bias).unwrap();
                let dx = ops::dense_backward(x, w, &dy, &mut dw, &mut db, need_dx);
                acc.tensors.insert(weight.clone(), dw);
                acc.tensors.insert(bias.clone(), db);
                dx
            }
            Layer::Relu => ops::relu_backward(x, &dy),
            Layer::MaxPool2d { window } => ops::maxpool_backward(x, image_dims(shapes[i])?, *window, &dy),
            Layer::AvgPool2d { window } => ops::avgpool_backward(x.len(), image_dims(shapes[i])?, *window, &dy),
            Layer::Flatten => dy,
        };
    }
    Ok((loss, correct))
}

/// Loss and parameter gradient for a single example.
pub fn example_gradient(model: &ModelGraph, sample: &Sample) -> Result<(f64, Gradients)> {
    let mut g = Gradients::zeros_like(model);
    let (loss, _) = accumulate_example(model, sample, &mut g)?;
    Ok((loss, g))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BatchStats {
    pub loss_sum: f64,
    pub correct: usize,
    pub count: usize,
}

/// Splits `batch` into `microbatches` equal consecutive groups and returns
/// the mean gradient of each group, with loss and accuracy tallies.
pub fn backward_with_stats(
    model: &ModelGraph,
    batch: &[Sample],
    microbatches: usize,
) -> Result<(Vec<Gradients>, BatchStats)> {
    if batch.is_empty() || microbatches == 0 || batch.len() % microbatches != 0 {
        return Err(NnError::Config(format!(
            "batch of {} cannot be split into {microbatches} microbatches",
            batch.len()
        )));
    }
    let size = batch.len() / microbatches;
    let mut stats = BatchStats::default();
    let mut out = Vec::with_capacity(microbatches);
    for group in batch.chunks_exact(size) {
        let mut g = Gradients::zeros_like(model);
        for s in group {
            let (loss, correct) = accumulate_example(model, s, &mut g)?;
            stats.loss_sum += loss;
            stats.correct += usize::from(correct);
            stats.count += 1;
        }
        g.divide(size as f64);
        out.push(g);
    }
    Ok((out, stats))
}

/// Mean gradient of each microbatch.
pub fn backward(model: &ModelGraph, batch: &[Sample], microbatches: usize) -> Result<Vec<Gradients>> {
    Ok(backward_with_stats(model, batch, microbatches)?.0)
}
