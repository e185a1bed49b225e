use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use privnet_core::Party;
use privnet_data::{load_image, preprocess_v1, preprocess_v2, AxisOrder, Method, CLASS_NAMES};
use privnet_nn::forward_plain;
use privnet_nn::model_file::load_model;
use privnet_serving::{load_party_model, serve_party, serve_queue, write_bundle, Capture, Client, QueueConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use crate::data_cmds::{AxisArg, MethodArg};
use crate::exit::{serving, user, Classify, CmdResult};
use crate::output::Output;

fn rng_for(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn read_config(path: &Path) -> CmdResult<QueueConfig> {
    QueueConfig::read(path).user_ctx(format!("reading config {}", path.display()))
}

#[derive(Args, Debug)]
pub struct ShareArgs {
    /// Plaintext model manifest written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory for the party vaults, receipt and queue.conf.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Seed for the share masks and generated keys; random when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// First of four consecutive localhost ports written to queue.conf.
    #[arg(long, default_value_t = 7400)]
    pub base_port: u16,
}

pub fn share(args: &ShareArgs, out: Output) -> CmdResult {
    let model = load_model(&args.model).user_ctx(format!("loading {}", args.model.display()))?;
    if args.base_port > u16::MAX - 3 {
        return Err(user("--base-port leaves no room for four ports"));
    }
    let mut rng = rng_for(args.seed);
    let receipt = write_bundle(&model, &args.out_dir, &mut rng).user()?;
    let config =
        QueueConfig::localhost(args.base_port, &receipt.model_id, model.arch.codec, model.arch.input, &mut rng);
    let conf_path = args.out_dir.join("queue.conf");
    config.write(&conf_path).user()?;
    out.emit(
        format!(
            "model {} (checksum {})\n{} tensors shared into {}\nconfig written to {}",
            receipt.model_id,
            receipt.checksum,
            receipt.tensors.len(),
            args.out_dir.display(),
            conf_path.display()
        ),
        json!({
            "command": "share", "model_id": receipt.model_id, "checksum": receipt.checksum,
            "tensors": receipt.tensors.len(), "out_dir": args.out_dir, "config": conf_path,
        }),
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Role {
    Party0,
    Party1,
    Party2,
    Queue,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, value_enum)]
    pub role: Role,
    #[arg(long, env = "PRIVNET_CONFIG")]
    pub config: PathBuf,
    /// Bundle directory written by `share`; required for party roles.
    #[arg(long)]
    pub vaults: Option<PathBuf>,
    /// Record the frames this party handles to DIR/<request>.p<party>.transcript.
    #[arg(long, value_name = "DIR")]
    pub capture_transcript: Option<PathBuf>,
}

pub fn serve(args: &ServeArgs, out: Output) -> CmdResult {
    let config = read_config(&args.config)?;
    let handle = match args.role {
        Role::Queue => serving(serve_queue(config))?,
        role => {
            let party = match role {
                Role::Party0 => Party::P0,
                Role::Party1 => Party::P1,
                _ => Party::P2,
            };
            let dir = args.vaults.as_ref().ok_or_else(|| user("party roles need --vaults"))?;
            let (model, receipt) = load_party_model(dir, party).user()?;
            let capture = match &args.capture_transcript {
                Some(d) => {
                    std::fs::create_dir_all(d).user_ctx(format!("creating {}", d.display()))?;
                    Some(Capture::Directory(d.clone()))
                }
                None => None,
            };
            serving(serve_party(party, config, model, &receipt.model_id, capture))?
        }
    };
    let role = args.role.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let addr = handle.local_addr();
    out.emit(
        format!("READY {role} {addr}"),
        json!({ "command": "serve", "ready": true, "role": role, "addr": addr.to_string() }),
    );

    let stop = handle.stop_flag();
    for sig in [signal_hook::consts::SIGTERM, signal_hook::consts::SIGINT] {
        signal_hook::flag::register(sig, stop.clone()).service()?;
    }
    handle.wait();
    out.note(format!("{role} stopped"));
    Ok(())
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, env = "PRIVNET_CONFIG")]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value = "v1")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "wh")]
    pub axis_order: AxisArg,
    /// Seed for the request id and input shares; random when absent.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn predict(args: &PredictArgs, out: Output) -> CmdResult {
    let config = read_config(&args.config)?;
    let img = load_image(&args.image).user()?;
    let (method, order): (Method, AxisOrder) = (args.method.into(), args.axis_order.into());
    let plane = match method {
        Method::V1 => preprocess_v1(&img, order),
        Method::V2 => preprocess_v2(&img),
    };
    let (h, w, c) = method.output_shape(order);
    if plane.data.len() != config.input_shape.len() {
        return Err(user(format!("{method} gives {h}x{w}x{c} inputs but the model takes {}", config.input_shape)));
    }
    let mut rng = rng_for(args.seed);
    let p = serving(Client::new(config).predict(&plane.data, &mut rng))?;
    let raw: Vec<u64> = p.raw.iter().map(|r| r.0).collect();
    out.emit(
        format!("{} (scores {:.4}, {:.4}; request {})", CLASS_NAMES[p.class], p.scores[0], p.scores[1], p.request_id),
        json!({
            "command": "predict", "class": CLASS_NAMES[p.class], "class_index": p.class,
            "scores": p.scores, "raw": raw, "request_id": p.request_id.to_hex(),
        }),
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Plaintext model manifest used for the local baseline.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, env = "PRIVNET_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long)]
    pub plaintext_only: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

struct Timing {
    mean_ms: f64,
    median_ms: f64,
}

fn summarize(mut ms: Vec<f64>) -> Timing {
    ms.sort_by(f64::total_cmp);
    let n = ms.len();
    let median_ms = if n % 2 == 1 { ms[n / 2] } else { (ms[n / 2 - 1] + ms[n / 2]) / 2.0 };
    Timing { mean_ms: ms.iter().sum::<f64>() / n as f64, median_ms }
}

pub fn bench(args: &BenchArgs, out: Output) -> CmdResult {
    if args.n == 0 {
        return Err(user("--n must be positive"));
    }
    let model = load_model(&args.model).user_ctx(format!("loading {}", args.model.display()))?;
    let mut rng = rng_for(args.seed);
    let inputs: Vec<Vec<f64>> =
        (0..args.n).map(|_| (0..model.arch.input.len()).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();

    let mut plain_ms = Vec::with_capacity(args.n);
    for x in &inputs {
        let t = Instant::now();
        forward_plain(&model, x).user()?;
        plain_ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let plain = summarize(plain_ms);
    let mut text = format!("plaintext: mean {:.3} ms, median {:.3} ms over {}", plain.mean_ms, plain.median_ms, args.n);
    let mut value = json!({
        "command": "bench", "n": args.n,
        "plaintext": { "mean_ms": plain.mean_ms, "median_ms": plain.median_ms },
    });

    if !args.plaintext_only {
        let path = args.config.as_ref().ok_or_else(|| user("--config is needed unless --plaintext-only"))?;
        let config = read_config(path)?;
        if config.input_shape != model.arch.input {
            return Err(user("the served model and --model take different input shapes"));
        }
        let client = Client::new(config);
        let mut secure_ms = Vec::with_capacity(args.n);
        for x in &inputs {
            let t = Instant::now();
            serving(client.predict(x, &mut rng))?;
            secure_ms.push(t.elapsed().as_secs_f64() * 1e3);
        }
        let secure = summarize(secure_ms);
        let ratio = secure.mean_ms / plain.mean_ms;
        text += &format!(
            "\nsecure: mean {:.3} ms, median {:.3} ms over {}\nratio secure/plaintext: {ratio:.1}",
            secure.mean_ms, secure.median_ms, args.n
        );
        value["secure"] = json!({ "mean_ms": secure.mean_ms, "median_ms": secure.median_ms });
        value["ratio"] = json!(ratio);
    }
    out.emit(text, value);
    Ok(())
}
