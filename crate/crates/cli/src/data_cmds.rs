use std::path::PathBuf;

use clap::{Args, ValueEnum};
use privnet_data::cache::cache_prefix;
use privnet_data::{
    build_manifest_tree, preprocess_path, synth_dataset, write_tensor_cache, AxisOrder, DatasetManifest, Method, Split,
    SynthConfig, TensorCache, CLASS_NAMES,
};
use serde_json::json;

use crate::exit::{user, Classify, CmdResult};
use crate::output::Output;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    V1,
    V2,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::V1 => Method::V1,
            MethodArg::V2 => Method::V2,
        }
    }
}

/// How the v1 target size `125, 150` is read.
#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum AxisArg {
    /// width 125, height 150
    #[default]
    Wh,
    /// height 125, width 150
    Hw,
}

impl From<AxisArg> for AxisOrder {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Wh => AxisOrder::WidthHeight,
            AxisArg::Hw => AxisOrder::HeightWidth,
        }
    }
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Image tree: train/, test/ and val/ subfolders, or a flat folder.
    #[arg(long)]
    pub input: PathBuf,
    /// Output prefix; writes PREFIX.bin, PREFIX.shape and PREFIX.manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "v1")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "wh")]
    pub axis_order: AxisArg,
}

fn counts_json(c: [usize; 2]) -> serde_json::Value {
    json!({ CLASS_NAMES[0]: c[0], CLASS_NAMES[1]: c[1] })
}

fn counts_text(c: [usize; 2]) -> String {
    format!("{} {}, {} {}", CLASS_NAMES[0], c[0], CLASS_NAMES[1], c[1])
}

pub fn preprocess(args: &PreprocessArgs, out: Output) -> CmdResult {
    if !args.input.is_dir() {
        return Err(user(format!("{} is not a directory", args.input.display())));
    }
    let manifest = build_manifest_tree(&args.input).user()?;
    for (path, reason) in &manifest.skipped {
        eprintln!("skipped {}: {reason}", path.display());
    }
    if manifest.records.is_empty() {
        return Err(user(format!("no labelled images under {}", args.input.display())));
    }
    let (method, order): (Method, AxisOrder) = (args.method.into(), args.axis_order.into());
    let mut cache = TensorCache::new(method.output_shape(order));
    let mut failures = Vec::new();
    for r in &manifest.records {
        match preprocess_path(&r.path, method, order) {
            Ok(p) => cache.push(r.clone(), &p.plane.data).user()?,
            Err(e) => failures.push(e.to_string()),
        }
    }
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("unreadable: {f}");
        }
        return Err(user(format!("{} of {} images could not be read", failures.len(), manifest.records.len())));
    }
    let prefix = cache_prefix(&args.out);
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).user()?;
    }
    write_tensor_cache(&prefix, &cache).user()?;
    let kept = DatasetManifest { records: manifest.records.clone(), skipped: Vec::new() };
    let mut manifest_path = prefix.clone().into_os_string();
    manifest_path.push(".manifest");
    kept.write_to(std::path::Path::new(&manifest_path)).user()?;

    let (h, w, c) = cache.shape;
    let train = manifest.counts_for(Split::Train);
    let test = manifest.counts_for(Split::Test);
    out.emit(
        format!(
            "train: {}\ntest: {}\nskipped: {}\n{} tensors of {h}x{w}x{c} written to {}.bin",
            counts_text(train),
            counts_text(test),
            manifest.skipped.len(),
            cache.len(),
            prefix.display()
        ),
        json!({
            "command": "preprocess",
            "train": counts_json(train),
            "test": counts_json(test),
            "skipped": manifest.skipped.len(),
            "shape": [h, w, c],
            "method": method.to_string(),
            "prefix": prefix,
        }),
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory; images go to OUT/train and OUT/test.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub per_class: usize,
    #[arg(long, default_value_t = 50)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 160)]
    pub width: u32,
    #[arg(long, default_value_t = 176)]
    pub height: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn synth(args: &SynthArgs, out: Output) -> CmdResult {
    let base = SynthConfig { n_per_class: args.per_class, width: args.width, height: args.height, seed: args.seed };
    let train = synth_dataset(&args.out.join("train"), Split::Train, &base).user()?;
    let mut counts = json!({ "train": counts_json(train.counts()) });
    let mut text = format!("train: {}", counts_text(train.counts()));
    if args.test_per_class > 0 {
        let cfg = SynthConfig { n_per_class: args.test_per_class, seed: args.seed.wrapping_add(1), ..base };
        let test = synth_dataset(&args.out.join("test"), Split::Test, &cfg).user()?;
        counts["test"] = counts_json(test.counts());
        text += &format!("\ntest: {}", counts_text(test.counts()));
    }
    counts["command"] = json!("synth");
    out.emit(text, counts);
    Ok(())
}
