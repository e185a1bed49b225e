mod data_cmds;
mod exit;
mod output;
mod serve_cmds;
mod train_cmds;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::output::Output;

/// Privacy-preserving image classification: DP training, model sharing and
/// three-party private prediction.
#[derive(Parser, Debug)]
#[command(name = "privnet", version)]
struct Cli {
    /// Print one JSON object per line instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decode, label and preprocess an image tree into a tensor cache.
    Preprocess(data_cmds::PreprocessArgs),
    /// Generate a labelled synthetic image tree.
    Synth(data_cmds::SynthArgs),
    /// Train the reference CNN, optionally with DP-SGD.
    Train(train_cmds::TrainArgs),
    /// Privacy budget for a given noise level and step count.
    Account(train_cmds::AccountArgs),
    /// Split a trained model into party vaults and write a local config.
    Share(serve_cmds::ShareArgs),
    /// Run a party server or the queue server.
    Serve(serve_cmds::ServeArgs),
    /// Classify one image through the private prediction service.
    Predict(serve_cmds::PredictArgs),
    /// Compare private and plaintext prediction latency.
    Bench(serve_cmds::BenchArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Output { json: cli.json };
    let result = match &cli.command {
        Command::Preprocess(a) => data_cmds::preprocess(a, out),
        Command::Synth(a) => data_cmds::synth(a, out),
        Command::Train(a) => train_cmds::train_cmd(a, out),
        Command::Account(a) => train_cmds::account(a, out),
        Command::Share(a) => serve_cmds::share(a, out),
        Command::Serve(a) => serve_cmds::serve(a, out),
        Command::Predict(a) => serve_cmds::predict(a, out),
        Command::Bench(a) => serve_cmds::bench(a, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
