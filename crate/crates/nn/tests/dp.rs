use std::collections::BTreeMap;

use privnet_core::FixedPointCodec;
use privnet_nn::backward::{backward, Gradients, Sample};
use privnet_nn::train::evaluate;
use privnet_nn::{
    account_epsilon, clip_gradient, dp_sgd_step, sgd_step, train, Architecture, DpSgdConfig, Layer, ModelGraph,
    NnError, PrivacySpend, Shape, TrainConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn small_cnn() -> ModelGraph {
    let arch = Architecture {
        input: Shape::Image { h: 8, w: 8, c: 1 },
        layers: vec![
            Layer::Conv2d { filters: 3, kernel: (3, 3), stride: 1, weight: "c.w".into(), bias: "c.b".into() },
            Layer::Relu,
            Layer::MaxPool2d { window: (2, 2) },
            Layer::Flatten,
            Layer::Dense { units: 2, weight: "d.w".into(), bias: "d.b".into() },
        ],
        codec: FixedPointCodec::default(),
    };
    ModelGraph::init(arch, 17).unwrap()
}

fn random_batch(rng: &mut ChaCha20Rng, n: usize, len: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| Sample { input: (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(), label: rng.gen_range(0..2) })
        .collect()
}

fn cfg(sigma: f64, clip: f64, m: usize, b: usize) -> DpSgdConfig {
    DpSgdConfig {
        learning_rate: 0.05,
        l2_norm_clip: clip,
        noise_multiplier: sigma,
        microbatches: m,
        batch_size: b,
        population: 10_000,
        delta: 1e-5,
    }
}

fn bits(model: &ModelGraph) -> Vec<u64> {
    model.weights.values().flat_map(|t| t.data.iter().map(|v| v.to_bits())).collect()
}

#[test]
fn dp_step_without_noise_or_clipping_is_sgd_bitwise() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut noise = ChaCha20Rng::seed_from_u64(2);
    let mut a = small_cnn();
    let mut b = a.clone();
    let c = cfg(0.0, 1e6, 1, 8);
    let mut spend = PrivacySpend::new(0.0);
    for _ in 0..100 {
        let batch = random_batch(&mut rng, 8, 64);
        let g = &backward(&a, &batch, 1).unwrap()[0];
        assert!(g.l2_norm() <= c.l2_norm_clip);
        sgd_step(&mut a, &batch, c.learning_rate).unwrap();
        dp_sgd_step(&mut b, &batch, &c, &mut noise, &mut spend).unwrap();
        assert_eq!(bits(&a), bits(&b));
    }
    assert_eq!(spend.steps, 100);
}

#[test]
fn fixed_seed_is_deterministic() {
    let run = || {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut noise = ChaCha20Rng::seed_from_u64(4);
        let mut m = small_cnn();
        let mut spend = PrivacySpend::new(1.1);
        for _ in 0..10 {
            let batch = random_batch(&mut rng, 8, 64);
            dp_sgd_step(&mut m, &batch, &cfg(1.1, 1.0, 4, 8), &mut noise, &mut spend).unwrap();
        }
        bits(&m)
    };
    assert_eq!(run(), run());
}

#[test]
fn per_example_and_single_microbatch_are_both_noise_free() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let batch = random_batch(&mut rng, 4, 64);
    for m in [1, 4] {
        let run = |seed| {
            let mut model = small_cnn();
            let mut noise = ChaCha20Rng::seed_from_u64(seed);
            dp_sgd_step(&mut model, &batch, &cfg(0.0, 0.5, m, 4), &mut noise, &mut PrivacySpend::new(0.0)).unwrap();
            bits(&model)
        };
        assert_eq!(run(1), run(2));
    }
}

#[test]
fn microbatches_must_divide_batch() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let batch = random_batch(&mut rng, 6, 64);
    let mut m = small_cnn();
    let err = dp_sgd_step(&mut m, &batch, &cfg(1.0, 1.0, 4, 8), &mut rng, &mut PrivacySpend::new(1.0));
    assert!(matches!(err, Err(NnError::Config(_))));
}

#[test]
fn noisy_update_is_unbiased() {
    // Dense model on 3 features: the mean of many noisy updates should land
    // within 3 standard errors of the noise-free clipped update.
    let arch = Architecture {
        input: Shape::Flat(3),
        layers: vec![Layer::Dense { units: 2, weight: "w".into(), bias: "b".into() }],
        codec: FixedPointCodec::default(),
    };
    let model = ModelGraph::init(arch, 2).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let batch = random_batch(&mut rng, 4, 3);
    let c = DpSgdConfig { learning_rate: 1.0, ..cfg(1.0, 0.3, 2, 4) };
    let expected = {
        let mut m = model.clone();
        dp_sgd_step(&mut m, &batch, &DpSgdConfig { noise_multiplier: 0.0, ..c }, &mut rng, &mut PrivacySpend::new(0.0))
            .unwrap();
        bits_to_update(&model, &m)
    };
    let draws = 10_000;
    let mut sum = vec![0.0; expected.len()];
    let mut noise = ChaCha20Rng::seed_from_u64(8);
    for _ in 0..draws {
        let mut m = model.clone();
        dp_sgd_step(&mut m, &batch, &c, &mut noise, &mut PrivacySpend::new(1.0)).unwrap();
        for (s, u) in sum.iter_mut().zip(bits_to_update(&model, &m)) {
            *s += u;
        }
    }
    let se = c.noise_multiplier * c.l2_norm_clip / c.microbatches as f64 / (draws as f64).sqrt();
    for (s, e) in sum.iter().zip(&expected) {
        let mean = s / draws as f64;
        assert!((mean - e).abs() <= 3.0 * se, "{mean} vs {e} (se {se})");
    }
}

fn bits_to_update(before: &ModelGraph, after: &ModelGraph) -> Vec<f64> {
    before.weights.iter().flat_map(|(n, t)| t.data.iter().zip(&after.weights[n].data).map(|(a, b)| a - b)).collect()
}

fn grads(values: Vec<f64>) -> Gradients {
    let half = values.len() / 2;
    Gradients {
        tensors: BTreeMap::from([
            ("a".to_string(), values[..half].to_vec()),
            ("b".to_string(), values[half..].to_vec()),
        ]),
    }
}

#[test]
fn clip_halves_at_twice_the_bound() {
    let g = grads(vec![2.0, 0.0, 0.0, 0.0]);
    let c = clip_gradient(&g, 1.0);
    assert_eq!(c.tensors["a"], vec![1.0, 0.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn clipped_norm_is_bounded(
        v in prop::collection::vec(-1e3f64..1e3, 2..40),
        c in 1e-3f64..10.0,
    ) {
        let g = grads(v);
        let clipped = clip_gradient(&g, c);
        prop_assert!(clipped.l2_norm() <= c + 1e-9);
        if g.l2_norm() <= c {
            prop_assert_eq!(clipped, g);
        }
    }
}

#[test]
fn accountant_closed_form() {
    // High-precision evaluation of 0.5 + 2 sqrt(0.5 ln 1e5).
    let oracle = 5.298_525_912_188_081_f64;
    assert!((account_epsilon(1, 1.0, 1e-5).unwrap() - oracle).abs() < 1e-6);
    assert_eq!(account_epsilon(0, 1.0, 1e-5).unwrap(), 0.0);
    assert!(account_epsilon(10, 2.0, 1e-5).unwrap() < account_epsilon(10, 1.0, 1e-5).unwrap());
}

#[test]
fn accountant_monotone_on_grid() {
    let sigmas: Vec<f64> = (1..=10).map(|i| 0.3 * i as f64).collect();
    let steps: Vec<u64> = (0..10).map(|i| 1 + 50 * i).collect();
    for &s in &sigmas {
        for w in steps.windows(2) {
            assert!(account_epsilon(w[0], s, 1e-5).unwrap() <= account_epsilon(w[1], s, 1e-5).unwrap());
        }
    }
    for &t in &steps {
        for w in sigmas.windows(2) {
            assert!(account_epsilon(t, w[0], 1e-5).unwrap() >= account_epsilon(t, w[1], 1e-5).unwrap());
        }
        assert!(account_epsilon(t, 1.0, 1e-6).unwrap() >= account_epsilon(t, 1.0, 1e-5).unwrap());
    }
}

fn separable(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = i % 2;
            let shift = if label == 1 { 1.0 } else { -1.0 };
            Sample { input: (0..4).map(|_| shift + rng.gen_range(-0.5..0.5)).collect(), label }
        })
        .collect()
}

fn linear_model() -> ModelGraph {
    let arch = Architecture {
        input: Shape::Flat(4),
        layers: vec![
            Layer::Dense { units: 8, weight: "h.w".into(), bias: "h.b".into() },
            Layer::Relu,
            Layer::Dense { units: 2, weight: "o.w".into(), bias: "o.b".into() },
        ],
        codec: FixedPointCodec::default(),
    };
    ModelGraph::init(arch, 3).unwrap()
}

#[test]
fn separable_set_trains_to_high_accuracy() {
    let data = separable(200, 1);
    let held = separable(50, 2);
    let cfg = TrainConfig { epochs: 50, batch_size: 16, learning_rate: 0.1, seed: 4, ..Default::default() };
    let out = train(linear_model(), &data, &held, &cfg).unwrap();
    let (_, acc) = evaluate(&out.model, &data).unwrap();
    assert!(acc >= 0.99, "train accuracy {acc}");
    assert!(out.log.iter().all(|m| m.epsilon.is_infinite()));
    assert!(out.log[0].to_string().ends_with(",inf"));
}

#[test]
fn dp_training_reports_finite_epsilon() {
    let data = separable(200, 1);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 20,
        learning_rate: 0.1,
        seed: 4,
        privacy: Some(privnet_nn::PrivacyConfig {
            l2_norm_clip: 1.0,
            noise_multiplier: 1.0,
            microbatches: 20,
            delta: 1e-3,
        }),
        ..Default::default()
    };
    let out = train(linear_model(), &data, &[], &cfg).unwrap();
    assert_eq!(out.spend.steps, 30);
    let eps = out.epsilon().unwrap();
    assert_eq!(eps, account_epsilon(30, 1.0, 1e-3).unwrap());
    assert_eq!(out.log.last().unwrap().epsilon, eps);
}

#[test]
fn zero_epochs_leaves_model_unchanged() {
    let m = linear_model();
    let cfg = TrainConfig { epochs: 0, ..Default::default() };
    assert_eq!(train(m.clone(), &separable(10, 1), &[], &cfg).unwrap().model, m);
}

#[test]
fn empty_dataset_is_a_config_error() {
    let cfg = TrainConfig::default();
    assert!(matches!(train(linear_model(), &[], &[], &cfg), Err(NnError::Config(_))));
}

#[test]
fn early_stopping_keeps_best_checkpoint() {
    let data = separable(100, 5);
    let held = separable(40, 6);
    let cfg =
        TrainConfig { epochs: 40, batch_size: 10, learning_rate: 0.2, seed: 1, patience: 2, ..Default::default() };
    let out = train(linear_model(), &data, &held, &cfg).unwrap();
    let best = out
        .log
        .iter()
        .filter(|m| m.split == "heldout")
        .max_by(|a, b| a.accuracy.partial_cmp(&b.accuracy).unwrap().then(b.epoch.cmp(&a.epoch)))
        .unwrap();
    assert_eq!(best.epoch, out.best_epoch);
    assert!((evaluate(&out.model, &held).unwrap().1 - best.accuracy).abs() < 1e-12);
}
