use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use privnet_data::{read_tensor_cache, Split};
use privnet_nn::model_file::save_model;
use privnet_nn::{
    account_epsilon, evaluate, train, Architecture, EpochMetrics, ModelGraph, PoolKind, PrivacyConfig, Sample, Shape,
    TrainConfig,
};
use serde_json::json;

use crate::exit::{user, Classify, CmdResult};
use crate::output::Output;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PoolArg {
    Max,
    Avg,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Tensor cache prefix written by `preprocess`.
    #[arg(long)]
    pub data: PathBuf,
    /// Model manifest to write; weights go next to it.
    #[arg(long)]
    pub model_out: PathBuf,
    #[arg(long)]
    pub dp: bool,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 32)]
    pub microbatches: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub delta: f64,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.02)]
    pub lr: f64,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, value_enum, default_value = "max")]
    pub pool: PoolArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn train_cmd(args: &TrainArgs, out: Output) -> CmdResult {
    let cache = read_tensor_cache(&args.data).user_ctx(format!("reading {}", args.data.display()))?;
    let (mut train_set, mut held_out) = (Vec::new(), Vec::new());
    for (i, r) in cache.records.iter().enumerate() {
        let s = Sample { input: cache.tensor(i).to_vec(), label: r.label as usize };
        match r.split {
            Split::Train => train_set.push(s),
            Split::Test => held_out.push(s),
        }
    }
    if train_set.is_empty() {
        return Err(user("the cache has no training records"));
    }
    if held_out.is_empty() {
        out.note("no test records; early stopping watches the training set");
        held_out = train_set.clone();
    }
    let (h, w, c) = cache.shape;
    let pool = match args.pool {
        PoolArg::Max => PoolKind::Max,
        PoolArg::Avg => PoolKind::Average,
    };
    let arch = Architecture::reference(pool, Shape::Image { h, w, c });
    let model = ModelGraph::init(arch, args.seed).user()?;
    let privacy = args.dp.then_some(PrivacyConfig {
        l2_norm_clip: args.clip,
        noise_multiplier: args.sigma,
        microbatches: args.microbatches,
        delta: args.delta,
    });
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        seed: args.seed,
        patience: args.patience,
        privacy,
    };
    let outcome = train(model, &train_set, &held_out, &cfg).user()?;

    let mut csv = format!("{}\n", EpochMetrics::CSV_HEADER);
    for m in &outcome.log {
        writeln!(csv, "{m}").unwrap();
        out.emit(
            m.to_string(),
            json!({
                "command": "train", "epoch": m.epoch, "split": m.split, "loss": m.loss,
                "accuracy": m.accuracy, "epsilon": m.epsilon.is_finite().then_some(m.epsilon),
            }),
        );
    }
    if let Some(dir) = args.model_out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).user()?;
    }
    save_model(&outcome.model, &args.model_out).user()?;
    let mut metrics = args.model_out.clone().into_os_string();
    metrics.push(".metrics.csv");
    std::fs::write(&metrics, csv).user()?;

    let (_, train_acc) = evaluate(&outcome.model, &train_set).user()?;
    let (_, held_acc) = evaluate(&outcome.model, &held_out).user()?;
    let mut text = format!(
        "best epoch {}: train accuracy {train_acc:.4}, held-out accuracy {held_acc:.4}\nmodel written to {}",
        outcome.best_epoch,
        args.model_out.display()
    );
    let mut value = json!({
        "command": "train", "final": true, "best_epoch": outcome.best_epoch,
        "train_accuracy": train_acc, "heldout_accuracy": held_acc, "model": args.model_out,
    });
    if args.dp {
        let eps = outcome.epsilon().user()?;
        write!(
            text,
            "\nepsilon {eps:.6} at delta {} after {} steps (sigma {})",
            args.delta, outcome.spend.steps, args.sigma
        )
        .unwrap();
        value["epsilon"] = json!(eps);
        value["delta"] = json!(args.delta);
        value["steps"] = json!(outcome.spend.steps);
    }
    out.emit(text, value);
    Ok(())
}

#[derive(Args, Debug)]
pub struct AccountArgs {
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub delta: f64,
    /// Number of noisy steps. Alternatively give --epochs, --batch-size and
    /// --population.
    #[arg(long, conflicts_with_all = ["epochs", "batch_size", "population"])]
    pub steps: Option<u64>,
    #[arg(long, requires_all = ["batch_size", "population"])]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<u64>,
    #[arg(long)]
    pub population: Option<u64>,
}

pub fn account(args: &AccountArgs, out: Output) -> CmdResult {
    let steps = match (args.steps, args.epochs, args.batch_size, args.population) {
        (Some(t), ..) => t,
        (None, Some(e), Some(b), Some(n)) if b > 0 && n >= b => e * (n / b),
        _ => return Err(user("give --steps, or --epochs with --batch-size <= --population")),
    };
    let eps = account_epsilon(steps, args.sigma, args.delta).user()?;
    out.emit(
        format!("epsilon {eps} at delta {} after {steps} steps with sigma {}", args.delta, args.sigma),
        json!({ "command": "account", "epsilon": eps.is_finite().then_some(eps), "delta": args.delta, "steps": steps, "sigma": args.sigma }),
    );
    Ok(())
}
