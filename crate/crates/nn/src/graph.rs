//! Layer graph, shape inference and weight storage.
//!
//! Activations are laid out height, width, channel (row-major). Convolution
//! weights have shape `[kh, kw, in_channels, filters]`, dense weights
//! `[inputs, units]`. Convolutions are unpadded cross-correlations; pooling
//! uses a stride equal to the window and drops trailing rows and columns.

use std::collections::BTreeMap;
use std::fmt;

use privnet_core::FixedPointCodec;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{NnError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Image { h: usize, w: usize, c: usize },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Image { h, w, c } => h * w * c,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Image { h, w, c } => write!(f, "{h}x{w}x{c}"),
            Shape::Flat(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Average,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Layer {
    Conv2d { filters: usize, kernel: (usize, usize), stride: usize, weight: String, bias: String },
    Dense { units: usize, weight: String, bias: String },
    Relu,
    MaxPool2d { window: (usize, usize) },
    AvgPool2d { window: (usize, usize) },
    Flatten,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d { .. } => "conv2d",
            Layer::Dense { .. } => "dense",
            Layer::Relu => "relu",
            Layer::MaxPool2d { .. } => "maxpool2d",
            Layer::AvgPool2d { .. } => "avgpool2d",
            Layer::Flatten => "flatten",
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let bad = |msg: String| Err(NnError::Shape(format!("{}: {msg}", self.kind())));
        match (self, input) {
            (Layer::Conv2d { filters, kernel: (kh, kw), stride, .. }, Shape::Image { h, w, .. }) => {
                if *filters == 0 || *kh == 0 || *kw == 0 || *stride == 0 {
                    return bad("filters, kernel and stride must be positive".into());
                }
                if h < *kh || w < *kw {
                    return bad(format!("kernel {kh}x{kw} larger than input {h}x{w}"));
                }
                Ok(Shape::Image { h: (h - kh) / stride + 1, w: (w - kw) / stride + 1, c: *filters })
            }
            (Layer::Dense { units, .. }, Shape::Flat(_)) => {
                if *units == 0 {
                    return bad("zero units".into());
                }
                Ok(Shape::Flat(*units))
            }
            (Layer::Relu, s) => Ok(s),
            (
                Layer::MaxPool2d { window: (ph, pw) } | Layer::AvgPool2d { window: (ph, pw) },
                Shape::Image { h, w, c },
            ) => {
                if *ph == 0 || *pw == 0 {
                    return bad("empty window".into());
                }
                if h < *ph || w < *pw {
                    return bad(format!("window {ph}x{pw} larger than input {h}x{w}"));
                }
                Ok(Shape::Image { h: h / ph, w: w / pw, c })
            }
            (Layer::Flatten, s) => Ok(Shape::Flat(s.len())),
            (_, s) => bad(format!("unsupported input shape {s}")),
        }
    }

    /// Names and shapes of the tensors this layer reads, given its input.
    pub fn tensor_specs(&self, input: Shape) -> Vec<(String, Vec<usize>)> {
        match (self, input) {
            (Layer::Conv2d { filters, kernel: (kh, kw), weight, bias, .. }, Shape::Image { c, .. }) => {
                vec![(weight.clone(), vec![*kh, *kw, c, *filters]), (bias.clone(), vec![*filters])]
            }
            (Layer::Dense { units, weight, bias }, Shape::Flat(n)) => {
                vec![(weight.clone(), vec![n, *units]), (bias.clone(), vec![*units])]
            }
            _ => Vec::new(),
        }
    }
}

/// Layers, input shape and fixed-point parameters; everything except the
/// weight values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub input: Shape,
    pub layers: Vec<Layer>,
    pub codec: FixedPointCodec,
}

impl Architecture {
    /// Shapes before the first layer and after each layer. Fails unless the
    /// graph ends in a two-class vector.
    pub fn shape_trace(&self) -> Result<Vec<Shape>> {
        if self.input.is_empty() {
            return Err(NnError::Shape("empty input shape".into()));
        }
        let mut shapes = vec![self.input];
        for (i, layer) in self.layers.iter().enumerate() {
            let next =
                layer.output_shape(*shapes.last().unwrap()).map_err(|e| NnError::Shape(format!("layer {i}: {e}")))?;
            shapes.push(next);
        }
        match shapes.last() {
            Some(Shape::Flat(2)) => Ok(shapes),
            Some(s) => Err(NnError::Shape(format!("graph output is {s}, expected 2 class scores"))),
            None => unreachable!(),
        }
    }

    pub fn tensor_specs(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let shapes = self.shape_trace()?;
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        for (layer, &input) in self.layers.iter().zip(&shapes) {
            for spec in layer.tensor_specs(input) {
                if out.iter().any(|(n, _)| *n == spec.0) {
                    return Err(NnError::Shape(format!("tensor {:?} used by two layers", spec.0)));
                }
                out.push(spec);
            }
        }
        Ok(out)
    }

    /// The reference classifier: two conv/relu/pool stages, a hidden dense
    /// layer and a two-way output.
    pub fn reference(pool: PoolKind, input: Shape) -> Self {
        let pool_layer = || match pool {
            PoolKind::Max => Layer::MaxPool2d { window: (2, 2) },
            PoolKind::Average => Layer::AvgPool2d { window: (2, 2) },
        };
        Architecture {
            input,
            layers: vec![
                Layer::Conv2d {
                    filters: 8,
                    kernel: (5, 5),
                    stride: 2,
                    weight: "conv1.weight".into(),
                    bias: "conv1.bias".into(),
                },
                Layer::Relu,
                pool_layer(),
                Layer::Conv2d {
                    filters: 16,
                    kernel: (3, 3),
                    stride: 1,
                    weight: "conv2.weight".into(),
                    bias: "conv2.bias".into(),
                },
                Layer::Relu,
                pool_layer(),
                Layer::Flatten,
                Layer::Dense { units: 32, weight: "dense1.weight".into(), bias: "dense1.bias".into() },
                Layer::Relu,
                Layer::Dense { units: 2, weight: "dense2.weight".into(), bias: "dense2.bias".into() },
            ],
            codec: FixedPointCodec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(NnError::Shape(format!("{} values do not fill shape {shape:?}", data.len())));
        }
        Ok(Tensor { shape, data })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph {
    pub arch: Architecture,
    pub weights: BTreeMap<String, Tensor>,
}

impl ModelGraph {
    /// Checks shapes along the graph and that every referenced tensor exists
    /// with the expected shape. Returns the shape trace.
    pub fn validate(&self) -> Result<Vec<Shape>> {
        let trace = self.arch.shape_trace()?;
        for (name, shape) in self.arch.tensor_specs()? {
            let t = self.weights.get(&name).ok_or_else(|| NnError::MissingTensor(name.clone()))?;
            if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(NnError::Shape(format!("tensor {name:?} has shape {:?}, expected {shape:?}", t.shape)));
            }
        }
        Ok(trace)
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        let weights = arch.tensor_specs()?.into_iter().map(|(n, s)| (n, Tensor::zeros(s))).collect();
        Ok(ModelGraph { arch, weights })
    }

    /// He-normal weights, zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let shapes = model.arch.shape_trace()?;
        for (layer, input) in model.arch.layers.iter().zip(&shapes) {
            let (weight, fan_in) = match (layer, input) {
                (Layer::Conv2d { kernel: (kh, kw), weight, .. }, Shape::Image { c, .. }) => (weight, kh * kw * c),
                (Layer::Dense { weight, .. }, Shape::Flat(n)) => (weight, *n),
                _ => continue,
            };
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            for v in &mut model.weights.get_mut(weight).unwrap().data {
                *v = normal.sample(&mut rng);
            }
        }
        Ok(model)
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.values().map(|t| t.data.len()).sum()
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.weights.get(name).ok_or_else(|| NnError::MissingTensor(name.to_string()))
    }
}
