use std::collections::BTreeMap;

use privnet_core::FixedPointCodec;
use privnet_nn::{argmax_class, forward_plain, Architecture, Layer, ModelGraph, NnError, PoolKind, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn codec() -> FixedPointCodec {
    FixedPointCodec::default()
}

/// Naive forward pass written directly from the layer definitions with
/// explicit 3-d indexing; shares no code with the library kernels.
fn oracle(model: &ModelGraph, input: &[f64]) -> Vec<f64> {
    let (mut h, mut w, mut c) = match model.arch.input {
        Shape::Image { h, w, c } => (h, w, c),
        Shape::Flat(n) => (1, 1, n),
    };
    let mut x = input.to_vec();
    for layer in &model.arch.layers {
        match layer {
            Layer::Conv2d { filters, kernel: (kh, kw), stride, weight, bias } => {
                let wt = &model.weights[weight].data;
                let b = &model.weights[bias].data;
                let oh = (h - kh) / stride + 1;
                let ow = (w - kw) / stride + 1;
                let mut y = vec![0.0; oh * ow * filters];
                for i in 0..oh {
                    for j in 0..ow {
                        for f in 0..*filters {
                            let mut acc = b[f];
                            for a in 0..*kh {
                                for bb in 0..*kw {
                                    for ch in 0..c {
                                        let xi = ((i * stride + a) * w + (j * stride + bb)) * c + ch;
                                        let wi = ((a * kw + bb) * c + ch) * filters + f;
                                        acc += x[xi] * wt[wi];
                                    }
                                }
                            }
                            y[(i * ow + j) * filters + f] = acc;
                        }
                    }
                }
                x = y;
                h = oh;
                w = ow;
                c = *filters;
            }
            Layer::Dense { units, weight, bias } => {
                let n = x.len();
                let wt = &model.weights[weight].data;
                let b = &model.weights[bias].data;
                x = (0..*units).map(|u| b[u] + (0..n).map(|i| x[i] * wt[i * units + u]).sum::<f64>()).collect();
                h = 1;
                w = 1;
                c = *units;
            }
            Layer::Relu => x = x.iter().map(|&v| v.max(0.0)).collect(),
            Layer::MaxPool2d { window: (ph, pw) } | Layer::AvgPool2d { window: (ph, pw) } => {
                let is_max = matches!(layer, Layer::MaxPool2d { .. });
                let (oh, ow) = (h / ph, w / pw);
                let mut y = Vec::new();
                for i in 0..oh {
                    for j in 0..ow {
                        for ch in 0..c {
                            let vals: Vec<f64> = (0..*ph)
                                .flat_map(|a| (0..*pw).map(move |b| (a, b)))
                                .map(|(a, b)| x[((i * ph + a) * w + j * pw + b) * c + ch])
                                .collect();
                            y.push(if is_max {
                                vals.iter().cloned().fold(f64::MIN, f64::max)
                            } else {
                                vals.iter().sum::<f64>() / vals.len() as f64
                            });
                        }
                    }
                }
                x = y;
                h = oh;
                w = ow;
            }
            Layer::Flatten => {
                c *= h * w;
                h = 1;
                w = 1;
            }
        }
    }
    x
}

fn random_model(rng: &mut ChaCha20Rng) -> ModelGraph {
    let h = rng.gen_range(6..14);
    let w = rng.gen_range(6..14);
    let c = rng.gen_range(1..4);
    let stride = rng.gen_range(1..3);
    let pool =
        if rng.gen_bool(0.5) { Layer::MaxPool2d { window: (2, 2) } } else { Layer::AvgPool2d { window: (2, 2) } };
    let arch = Architecture {
        input: Shape::Image { h, w, c },
        layers: vec![
            Layer::Conv2d {
                filters: rng.gen_range(1..5),
                kernel: (rng.gen_range(1..4), rng.gen_range(1..4)),
                stride,
                weight: "c.w".into(),
                bias: "c.b".into(),
            },
            Layer::Relu,
            pool,
            Layer::Flatten,
            Layer::Dense { units: rng.gen_range(2..6), weight: "d1.w".into(), bias: "d1.b".into() },
            Layer::Relu,
            Layer::Dense { units: 2, weight: "d2.w".into(), bias: "d2.b".into() },
        ],
        codec: codec(),
    };
    let mut model = ModelGraph::zeros(arch).unwrap();
    for t in model.weights.values_mut() {
        for v in &mut t.data {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    model
}

#[test]
fn matches_schoolbook_oracle_on_random_models() {
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    for _ in 0..200 {
        let model = random_model(&mut rng);
        let input: Vec<f64> = (0..model.arch.input.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = forward_plain(&model, &input).unwrap();
        let want = oracle(&model, &input);
        assert_eq!(got.len(), 2);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9, "{g} vs {w}");
        }
    }
}

#[test]
fn reference_models_match_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for pool in [PoolKind::Max, PoolKind::Average] {
        let arch = Architecture::reference(pool, Shape::Image { h: 150, w: 125, c: 1 });
        let model = ModelGraph::init(arch, 9).unwrap();
        let input: Vec<f64> = (0..150 * 125).map(|_| rng.gen::<f64>()).collect();
        let got = forward_plain(&model, &input).unwrap();
        let want = oracle(&model, &input);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9);
        }
    }
}

#[test]
fn identity_dense_passes_input_through() {
    let mut eye = vec![0.0; 4];
    eye[0] = 1.0;
    eye[3] = 1.0;
    let model = ModelGraph {
        arch: Architecture {
            input: Shape::Flat(2),
            layers: vec![Layer::Dense { units: 2, weight: "w".into(), bias: "b".into() }],
            codec: codec(),
        },
        weights: BTreeMap::from([
            ("w".into(), Tensor::new(vec![2, 2], eye).unwrap()),
            ("b".into(), Tensor::zeros(vec![2])),
        ]),
    };
    assert_eq!(forward_plain(&model, &[0.25, -3.0]).unwrap(), vec![0.25, -3.0]);
}

#[test]
fn unit_1x1_conv_is_identity() {
    let model = ModelGraph {
        arch: Architecture {
            input: Shape::Image { h: 1, w: 2, c: 1 },
            layers: vec![
                Layer::Conv2d { filters: 1, kernel: (1, 1), stride: 1, weight: "w".into(), bias: "b".into() },
                Layer::Flatten,
            ],
            codec: codec(),
        },
        weights: BTreeMap::from([
            ("w".into(), Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap()),
            ("b".into(), Tensor::zeros(vec![1])),
        ]),
    };
    assert_eq!(forward_plain(&model, &[0.7, -0.1]).unwrap(), vec![0.7, -0.1]);
}

#[test]
fn input_shape_mismatch_is_rejected() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let model = random_model(&mut rng);
    assert!(matches!(forward_plain(&model, &[1.0]), Err(NnError::Shape(_))));
}

#[test]
fn argmax_examples() {
    assert_eq!(argmax_class(&[0.2, 0.9]).unwrap(), 1);
    assert_eq!(argmax_class(&[0.5, 0.5]).unwrap(), 0);
    assert!(matches!(argmax_class(&[]), Err(NnError::Shape(_))));
}
