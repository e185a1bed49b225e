//! Plaintext floating-point inference.

use crate::error::{NnError, Result};
use crate::graph::{Layer, ModelGraph, Shape};
use crate::ops::{self, ConvGeometry, ImageDims};

pub(crate) fn image_dims(s: Shape) -> Result<ImageDims> {
    match s {
        Shape::Image { h, w, c } => Ok(ImageDims { h, w, c }),
        Shape::Flat(_) => Err(NnError::Shape(format!("expected an image, got {s}"))),
    }
}

pub(crate) fn conv_geometry(layer: &Layer, input: Shape) -> Result<ConvGeometry> {
    match layer {
        Layer::Conv2d { filters, kernel, stride, .. } => {
            Ok(ConvGeometry { input: image_dims(input)?, kernel: *kernel, stride: *stride, filters: *filters })
        }
        _ => Err(NnError::Shape(format!("{} is not a convolution", layer.kind()))),
    }
}

/// Runs the graph and keeps every intermediate activation: element 0 is the
/// input, element `i + 1` the output of layer `i`.
pub fn forward_trace(model: &ModelGraph, input: &[f64]) -> Result<Vec<Vec<f64>>> {
    let shapes = model.validate()?;
    if input.len() != shapes[0].len() {
        return Err(NnError::Shape(format!("input has {} values, model expects {}", input.len(), shapes[0])));
    }
    let mut acts = vec![input.to_vec()];
    for (layer, &shape) in model.arch.layers.iter().zip(&shapes) {
        let x = acts.last().unwrap();
        let y = match layer {
            Layer::Conv2d { weight, bias, .. } => ops::conv2d_forward(
                x,
                &conv_geometry(layer, shape)?,
                &model.tensor(weight)?.data,
                &model.tensor(bias)?.data,
            ),
            Layer::Dense { weight, bias, .. } => {
                ops::dense_forward(x, &model.tensor(weight)?.data, &model.tensor(bias)?.data)
            }
            Layer::Relu => ops::relu_forward(x),
            Layer::MaxPool2d { window } => ops::maxpool_forward(x, image_dims(shape)?, *window),
            Layer::AvgPool2d { window } => ops::avgpool_forward(x, image_dims(shape)?, *window),
            Layer::Flatten => x.clone(),
        };
        acts.push(y);
    }
    Ok(acts)
}

/// Class scores for one input.
pub fn forward_plain(model: &ModelGraph, input: &[f64]) -> Result<Vec<f64>> {
    Ok(forward_trace(model, input)?.pop().unwrap())
}

/// Index of the largest score; ties go to the lower index.
pub fn argmax_class(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() || scores.iter().any(|s| s.is_nan()) {
        return Err(NnError::Shape("no comparable scores".into()));
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}
