use privnet_core::mpc::local::LocalSetup;
use privnet_core::sharing::additive::reconstruct_slice;
use privnet_core::{FixedPointCodec, Party, RingElement};
use privnet_nn::secure::{predict_local, predict_shared, share_input};
use privnet_nn::{forward_plain, share_model, Architecture, Layer, ModelGraph, NnError, PoolKind, Shape, SharedModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn quantized(model: &ModelGraph) -> ModelGraph {
    let codec = model.arch.codec;
    let mut q = model.clone();
    for t in q.weights.values_mut() {
        for v in &mut t.data {
            *v = codec.decode(codec.encode(*v).unwrap());
        }
    }
    q
}

fn dense_model(n: usize, rng: &mut ChaCha20Rng) -> ModelGraph {
    let arch = Architecture {
        input: Shape::Flat(n),
        layers: vec![Layer::Dense { units: 2, weight: "w".into(), bias: "b".into() }],
        codec: FixedPointCodec::default(),
    };
    let mut m = ModelGraph::zeros(arch).unwrap();
    for t in m.weights.values_mut() {
        for v in &mut t.data {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    m
}

#[test]
fn single_dense_layer_within_two_ulps() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let codec = FixedPointCodec::default();
    for trial in 0..20 {
        let model = dense_model(16, &mut rng);
        let input: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q_input: Vec<f64> = input.iter().map(|&x| codec.decode(codec.encode(x).unwrap())).collect();
        let want = forward_plain(&quantized(&model), &q_input).unwrap();
        let got = predict_local(&LocalSetup::seeded(trial), &model, &input, &mut rng).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 2.0 * codec.ulp(), "{g} vs {w}");
        }
    }
}

#[test]
fn zero_model_zero_input_gives_zero() {
    let arch = Architecture::reference(PoolKind::Max, Shape::Image { h: 30, w: 26, c: 1 });
    let model = ModelGraph::zeros(arch).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let got = predict_local(&LocalSetup::seeded(2), &model, &vec![0.0; 30 * 26], &mut rng).unwrap();
    assert_eq!(got, vec![0.0, 0.0]);
}

#[test]
fn reference_cnn_matches_plain() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for pool in [PoolKind::Max, PoolKind::Average] {
        let arch = Architecture::reference(pool, Shape::Image { h: 150, w: 125, c: 1 });
        let model = ModelGraph::init(arch, 11).unwrap();
        for i in 0..5 {
            let input: Vec<f64> = (0..150 * 125).map(|_| rng.gen::<f64>()).collect();
            let plain = forward_plain(&model, &input).unwrap();
            let secure = predict_local(&LocalSetup::seeded(100 + i), &model, &input, &mut rng).unwrap();
            for (s, p) in secure.iter().zip(&plain) {
                assert!((s - p).abs() <= 1e-2, "{pool:?}: {s} vs {p}");
            }
        }
    }
}

#[test]
fn shared_model_reconstructs_encoded_weights_exactly() {
    let arch = Architecture::reference(PoolKind::Average, Shape::Image { h: 30, w: 26, c: 1 });
    let model = ModelGraph::init(arch, 4).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let [v0, v1] = share_model(&model, &mut rng).unwrap();
    let s0 = SharedModel::from_vault(model.arch.clone(), &v0).unwrap();
    let s1 = SharedModel::from_vault(model.arch.clone(), &v1).unwrap();
    assert_eq!(s0.party, Party::P0);
    assert_eq!(s1.party, Party::P1);
    for (name, t) in &model.weights {
        let rec = reconstruct_slice(&s0.weights[name], &s1.weights[name]).unwrap();
        assert_eq!(rec, model.arch.codec.encode_slice(&t.data).unwrap());
    }
    let zero = ModelGraph::zeros(model.arch.clone()).unwrap();
    let [z0, z1] = share_model(&zero, &mut rng).unwrap();
    for (a, b) in z0.tensors.iter().zip(&z1.tensors) {
        assert!(reconstruct_slice(&a.values, &b.values).unwrap().iter().all(|v| *v == RingElement::zero()));
    }
}

#[test]
fn vault_share_bytes_are_uniform() {
    // Frequency test on the low byte of every share word: 256 bins,
    // chi-square with 255 degrees of freedom, 0.999 quantile 330.5.
    let arch = Architecture::reference(PoolKind::Max, Shape::Image { h: 150, w: 125, c: 1 });
    let model = ModelGraph::zeros(arch).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let [v0, _] = share_model(&model, &mut rng).unwrap();
    let mut bins = [0f64; 256];
    let mut n = 0f64;
    for t in &v0.tensors {
        for v in &t.values {
            bins[(v.to_u64() & 0xff) as usize] += 1.0;
            n += 1.0;
        }
    }
    let e = n / 256.0;
    let chi: f64 = bins.iter().map(|o| (o - e) * (o - e) / e).sum();
    assert!(n > 20_000.0);
    assert!(chi < 330.5, "chi-square {chi}");
}

#[test]
fn out_of_range_weight_names_tensor() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut model = dense_model(4, &mut rng);
    model.weights.get_mut("b").unwrap().data[1] = 5.0e7;
    match share_model(&model, &mut rng) {
        Err(NnError::TensorRange { tensor, .. }) => assert_eq!(tensor, "b"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn protocol_failure_names_layer() {
    let arch = Architecture {
        input: Shape::Flat(4),
        layers: vec![Layer::Relu, Layer::Dense { units: 2, weight: "w".into(), bias: "b".into() }],
        codec: FixedPointCodec::default(),
    };
    let mut broken = SharedModel::for_dealer(arch).unwrap();
    broken.weights.insert("w".into(), vec![RingElement::zero(); 3]);
    let mut m0 = broken.clone();
    m0.party = Party::P0;
    let mut m1 = broken.clone();
    m1.party = Party::P1;
    let zeros = vec![RingElement::zero(); 4];
    let err =
        predict_shared(&LocalSetup::seeded(7), &[m0, m1, broken], &[zeros.clone(), zeros.clone(), zeros]).unwrap_err();
    match err {
        NnError::SecureLayer { index, layer, .. } => {
            assert_eq!(index, 1);
            assert_eq!(layer, "dense");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn wire_shares_differ_between_sharings() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let codec = FixedPointCodec::default();
    let x = [0.5, -0.25, 1.0];
    let (a0, a1) = share_input(codec, &x, &mut rng).unwrap();
    let (b0, b1) = share_input(codec, &x, &mut rng).unwrap();
    assert_ne!(a0, b0);
    assert_eq!(reconstruct_slice(&a0, &a1).unwrap(), reconstruct_slice(&b0, &b1).unwrap());
}

#[test]
fn from_vault_rejects_missing_tensor() {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let model = dense_model(4, &mut rng);
    let [v0, _] = share_model(&model, &mut rng).unwrap();
    let other = Architecture {
        input: Shape::Flat(4),
        layers: vec![Layer::Dense { units: 2, weight: "other".into(), bias: "b".into() }],
        codec: FixedPointCodec::default(),
    };
    assert!(matches!(SharedModel::from_vault(other, &v0), Err(NnError::MissingTensor(_))));
}
