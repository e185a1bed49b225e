use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use privnet_core::FixedPointCodec;
use privnet_nn::model_file::save_model;
use privnet_nn::{Architecture, Layer, ModelGraph, Shape};
use privnet_serving::QueueConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::Value;

fn privnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privnet")).args(args).env_remove("PRIVNET_CONFIG").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_lines(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn account_matches_closed_form() {
    let o = privnet(&["--json", "account", "--sigma", "1", "--steps", "1", "--delta", "1e-5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let eps = json_lines(&o)[0]["epsilon"].as_f64().unwrap();
    assert!((eps - 5.298_525_912_188_081).abs() < 1e-9);

    let o = privnet(&[
        "--json",
        "account",
        "--sigma",
        "2",
        "--delta",
        "1e-5",
        "--epochs",
        "3",
        "--batch-size",
        "10",
        "--population",
        "100",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json_lines(&o)[0]["steps"], 30);
}

#[test]
fn account_rejects_bad_arguments() {
    assert_eq!(privnet(&["account", "--sigma", "1", "--delta", "1e-5"]).status.code(), Some(2));
    assert_eq!(privnet(&["account", "--sigma", "1", "--steps", "5", "--delta", "2"]).status.code(), Some(2));
    assert_eq!(privnet(&["account", "--sigma", "x", "--steps", "5", "--delta", "1e-5"]).status.code(), Some(2));
}

#[test]
fn preprocess_errors_are_user_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = dir.path().join("cache/ds");
    let o = privnet(&["preprocess", "--input", s(&missing), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = privnet(&["preprocess", "--input", s(&empty), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no labelled images"));

    std::fs::write(empty.join("IM-1-NORMAL.png"), b"not an image").unwrap();
    let o = privnet(&["preprocess", "--input", s(&empty), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("IM-1-NORMAL.png"), "{}", stderr(&o));
    assert!(!dir.path().join("cache/ds.bin").exists());
}

#[test]
fn synth_preprocess_train_share_flow() {
    let dir = tempfile::tempdir().unwrap();
    let p = |x: &str| dir.path().join(x);
    let o = privnet(&[
        "--json",
        "synth",
        "--out",
        s(&p("imgs")),
        "--per-class",
        "4",
        "--test-per-class",
        "2",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json_lines(&o)[0]["train"]["PNEUMONIA"], 4);

    // A stray unlabelled file is skipped and reported, not fatal.
    std::fs::write(p("imgs/train/scan.png"), b"x").unwrap();
    let o = privnet(&["--json", "preprocess", "--input", s(&p("imgs")), "--out", s(&p("cache/ds"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = &json_lines(&o)[0];
    assert_eq!(v["skipped"], 1);
    assert_eq!(v["shape"], serde_json::json!([150, 125, 1]));
    assert_eq!(v["test"]["NORMAL"], 2);
    assert!(stderr(&o).contains("scan.png"));
    assert!(p("cache/ds.manifest").exists());

    let model = p("model/m.manifest");
    let o = privnet(&[
        "--json",
        "train",
        "--data",
        s(&p("cache/ds")),
        "--model-out",
        s(&model),
        "--epochs",
        "1",
        "--dp",
        "--batch-size",
        "4",
        "--microbatches",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = json_lines(&o);
    let last = lines.last().unwrap();
    assert_eq!(last["final"], true);
    assert!(last["epsilon"].as_f64().unwrap() > 0.0);
    assert_eq!(last["steps"], 2);
    let csv = std::fs::read_to_string(p("model/m.manifest.metrics.csv")).unwrap();
    assert!(csv.starts_with("epoch,split,loss,accuracy,epsilon\n"));
    assert_eq!(csv.lines().count(), 3);

    let o = privnet(&["--json", "share", "--model", s(&model), "--out-dir", s(&p("bundle")), "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let id = json_lines(&o)[0]["model_id"].as_str().unwrap().to_string();
    let cfg = QueueConfig::read(&p("bundle/queue.conf")).unwrap();
    assert_eq!(cfg.model, id);
    assert_eq!(cfg.queue, "127.0.0.1:7400");
    for f in ["party0.vault", "party1.vault", "model.manifest", "receipt.txt"] {
        assert!(p("bundle").join(f).exists(), "{f}");
    }
}

#[test]
fn train_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.manifest");
    let o = privnet(&["train", "--data", s(&dir.path().join("missing")), "--model-out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    privnet(&["synth", "--out", s(&dir.path().join("imgs")), "--per-class", "2", "--test-per-class", "0"]);
    privnet(&["preprocess", "--input", s(&dir.path().join("imgs")), "--out", s(&dir.path().join("ds"))]);
    // Microbatches must divide the batch.
    let o = privnet(&[
        "train",
        "--data",
        s(&dir.path().join("ds")),
        "--model-out",
        s(&out),
        "--dp",
        "--batch-size",
        "4",
        "--microbatches",
        "3",
        "--epochs",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn share_names_the_tensor_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let arch = Architecture {
        input: Shape::Flat(3),
        layers: vec![Layer::Dense { units: 2, weight: "head.w".into(), bias: "head.b".into() }],
        codec: FixedPointCodec::default(),
    };
    let mut model = ModelGraph::init(arch, 1).unwrap();
    model.weights.get_mut("head.b").unwrap().data[1] = 1e7;
    let path = dir.path().join("m.manifest");
    save_model(&model, &path).unwrap();
    let o = privnet(&["share", "--model", s(&path), "--out-dir", s(&dir.path().join("b"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("head.b"), "{}", stderr(&o));
    assert!(!dir.path().join("b/party0.vault").exists());
}

#[test]
fn serve_and_predict_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    let ports: Vec<u16> = (0..4)
        .map(|_| TcpListener::bind("127.0.0.1:0").unwrap())
        .collect::<Vec<_>>()
        .iter()
        .map(|l| l.local_addr().unwrap().port())
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut cfg =
        QueueConfig::localhost(1, "abc", FixedPointCodec::default(), Shape::Image { h: 150, w: 125, c: 1 }, &mut rng);
    cfg.queue = format!("127.0.0.1:{}", ports[0]);
    cfg.parties = [1, 2, 3].map(|i| format!("127.0.0.1:{}", ports[i]));
    let conf = dir.path().join("q.conf");
    cfg.write(&conf).unwrap();
    privnet(&["synth", "--out", s(&dir.path().join("imgs")), "--per-class", "1", "--test-per-class", "0"]);
    let image = std::fs::read_dir(dir.path().join("imgs/train")).unwrap().next().unwrap().unwrap().path();

    // Nothing listens: a service failure.
    let o = privnet(&["predict", "--image", s(&image), "--config", s(&conf)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    // The v2 pipeline produces a different shape than the config expects.
    let o = privnet(&["predict", "--image", s(&image), "--config", s(&conf), "--method", "v2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = privnet(&["predict", "--image", s(&dir.path().join("none.png")), "--config", s(&conf)]);
    assert_eq!(o.status.code(), Some(2));
    let o = privnet(&["predict", "--image", s(&image), "--config", s(&dir.path().join("none.conf"))]);
    assert_eq!(o.status.code(), Some(2));

    let o = privnet(&["serve", "--role", "party0", "--config", s(&conf)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--vaults"));
    let o = privnet(&["serve", "--role", "party1", "--config", s(&conf), "--vaults", s(&dir.path().join("none"))]);
    assert_eq!(o.status.code(), Some(2));

    // The queue's port is taken: a service failure.
    let _hold = TcpListener::bind(&cfg.queue).unwrap();
    let o = privnet(&["serve", "--role", "queue", "--config", s(&conf)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn bench_plaintext_only() {
    let dir = tempfile::tempdir().unwrap();
    let arch = Architecture {
        input: Shape::Flat(4),
        layers: vec![Layer::Dense { units: 2, weight: "w".into(), bias: "b".into() }],
        codec: FixedPointCodec::default(),
    };
    let path = dir.path().join("m.manifest");
    save_model(&ModelGraph::init(arch, 2).unwrap(), &path).unwrap();
    let o = privnet(&["--json", "bench", "--model", s(&path), "--n", "3", "--plaintext-only"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = &json_lines(&o)[0];
    assert_eq!(v["n"], 3);
    assert!(v["plaintext"]["mean_ms"].as_f64().unwrap() >= 0.0);
    assert!(v.get("ratio").is_none());
    assert_eq!(privnet(&["bench", "--model", s(&path), "--n", "3"]).status.code(), Some(2));
}
