use std::fs;

use privnet_core::{FixedPointCodec, Party};
use privnet_nn::{Architecture, Layer, ModelGraph, NnError, PoolKind, Shape};
use privnet_serving::bundle::{read_vault, vault_file, RECEIPT_FILE};
use privnet_serving::{load_party_model, verify_bundle, write_bundle, QueueConfig, ServingError};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn sample_config() -> QueueConfig {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    QueueConfig::localhost(
        7400,
        "0123abcd0123abcd",
        FixedPointCodec::default(),
        Shape::Image { h: 150, w: 125, c: 1 },
        &mut rng,
    )
}

fn small_model(seed: u64) -> ModelGraph {
    let arch = Architecture {
        input: Shape::Flat(6),
        layers: vec![
            Layer::Dense { units: 4, weight: "d1.weight".into(), bias: "d1.bias".into() },
            Layer::Relu,
            Layer::Dense { units: 2, weight: "d2.weight".into(), bias: "d2.bias".into() },
        ],
        codec: FixedPointCodec::default(),
    };
    ModelGraph::init(arch, seed).unwrap()
}

#[test]
fn config_write_read_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("queue.conf");
    let cfg = sample_config();
    cfg.write(&path).unwrap();
    assert_eq!(QueueConfig::read(&path).unwrap(), cfg);

    let mut flat = cfg.clone();
    flat.input_shape = Shape::Flat(40);
    flat.timeout_secs = 7;
    assert_eq!(QueueConfig::parse(&flat.to_text()).unwrap(), flat);
}

#[test]
fn config_comments_and_default_timeout() {
    let text: String = sample_config()
        .to_text()
        .lines()
        .filter(|l| !l.starts_with("timeout_secs"))
        .map(|l| format!("# note\n{l}\n"))
        .collect();
    assert_eq!(QueueConfig::parse(&text).unwrap().timeout_secs, 120);
}

#[test]
fn truncated_config_is_rejected() {
    let text = sample_config().to_text();
    // Cut in the middle of the party1 endpoint.
    let cut = text.find("party1 = ").unwrap() + "party1 = 127.".len();
    match QueueConfig::parse(&text[..cut]) {
        Err(ServingError::Config { line: 3, .. }) => {}
        other => panic!("expected a line-3 error, got {other:?}"),
    }
    let lines: Vec<&str> = text.lines().collect();
    let short = lines[..6].join("\n");
    match QueueConfig::parse(&short) {
        Err(ServingError::Config { line: 7, message }) => assert!(message.contains("missing")),
        other => panic!("expected a missing-key error, got {other:?}"),
    }
}

#[test]
fn unknown_and_repeated_keys_name_the_line() {
    let text = sample_config().to_text() + "colour = blue\n";
    match QueueConfig::parse(&text) {
        Err(ServingError::Config { line: 13, message }) => assert!(message.contains("colour")),
        other => panic!("{other:?}"),
    }
    let text = sample_config().to_text().replacen("model = ", "model = a\nmodel = ", 1);
    assert!(matches!(QueueConfig::parse(&text), Err(ServingError::Config { line: 6, .. })));
    let text = sample_config().to_text().replace("mesh_key = ", "mesh_key = 00");
    assert!(matches!(QueueConfig::parse(&text), Err(ServingError::Config { line: 10, .. })));
}

#[test]
fn duplicate_endpoints_fail_validation() {
    let mut cfg = sample_config();
    cfg.parties[2] = cfg.parties[0].clone();
    assert!(matches!(cfg.validate(), Err(ServingError::Invalid(_))));
    assert!(matches!(QueueConfig::parse(&cfg.to_text()), Err(ServingError::Invalid(_))));
    let mut cfg = sample_config();
    cfg.queue = cfg.parties[1].clone();
    assert!(cfg.validate().is_err());
}

#[test]
fn bundle_roundtrip_and_fresh_shares() {
    let model = small_model(3);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = write_bundle(&model, a.path(), &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    let rb = write_bundle(&model, b.path(), &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(verify_bundle(a.path()).unwrap(), ra);
    assert_eq!(verify_bundle(b.path()).unwrap(), rb);
    for i in 0..2 {
        let fa = fs::read(a.path().join(vault_file(i))).unwrap();
        let fb = fs::read(b.path().join(vault_file(i))).unwrap();
        assert_ne!(fa, fb);
    }
    assert_eq!(ra.tensors.len(), 4);
    assert_eq!(ra.model_id, &ra.checksum[..16]);

    let other = write_bundle(&small_model(4), b.path(), &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
    assert_ne!(other.checksum, ra.checksum);
}

#[test]
fn tampered_vault_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&small_model(5), dir.path(), &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    let path = dir.path().join(vault_file(1));
    let mut v = read_vault(&path).unwrap();
    v.tensors[0].values[0] += privnet_core::RingElement::one();
    fs::write(&path, v.to_bytes()).unwrap();
    assert!(verify_bundle(dir.path()).is_err());
}

#[test]
fn oversized_weight_names_tensor_and_writes_nothing() {
    let mut model = small_model(6);
    model.weights.get_mut("d2.bias").unwrap().data[1] = 3.0e6;
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bundle");
    match write_bundle(&model, &out, &mut ChaCha20Rng::seed_from_u64(1)) {
        Err(ServingError::Nn(NnError::TensorRange { tensor, .. })) => assert_eq!(tensor, "d2.bias"),
        other => panic!("{other:?}"),
    }
    assert!(!out.exists());
}

#[test]
fn party_loading_checks_files() {
    let dir = tempfile::tempdir().unwrap();
    let model =
        ModelGraph::init(Architecture::reference(PoolKind::Average, Shape::Image { h: 40, w: 36, c: 1 }), 1).unwrap();
    let receipt = write_bundle(&model, dir.path(), &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
    let (m0, r0) = load_party_model(dir.path(), Party::P0).unwrap();
    assert_eq!(m0.party, Party::P0);
    assert_eq!(r0, receipt);
    let (m2, _) = load_party_model(dir.path(), Party::P2).unwrap();
    assert_eq!(m2.party, Party::P2);

    // A party-0 vault under the party-1 name is refused.
    fs::copy(dir.path().join(vault_file(0)), dir.path().join(vault_file(1))).unwrap();
    assert!(load_party_model(dir.path(), Party::P1).is_err());

    fs::remove_file(dir.path().join(vault_file(1))).unwrap();
    let err = load_party_model(dir.path(), Party::P1).unwrap_err().to_string();
    assert!(err.contains("party1.vault"), "{err}");
    // The helper still starts without any vault.
    assert!(load_party_model(dir.path(), Party::P2).is_ok());

    fs::remove_file(dir.path().join(RECEIPT_FILE)).unwrap();
    assert!(load_party_model(dir.path(), Party::P0).is_err());
}
