//! `liveness`: corpus synthesis, training, evaluation, prediction and serving.
//!
//! Exit status is 0 on success, 1 on any error (usage errors included) and,
//! for `predict`, 2 when the verdict is `attack`.

mod commands;
mod config;

use std::net::IpAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use liveness_core::data::DEFAULT_PADDING_FRACTION;
use liveness_core::{BBox, OptimizerKind, Split};
use liveness_service::DetectorBinding;

#[derive(Parser, Debug)]
#[command(name = "liveness", version, about = "Face liveness detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic spoof corpus.
    Synth(SynthArgs),
    /// Train a model on a corpus.
    Train(TrainArgs),
    /// Score a split and write an evaluation report.
    Eval(EvalArgs),
    /// Classify one image.
    Predict(PredictArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub subjects: u64,
    /// Frames per subject and class; each yields a tight and a padded crop.
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u64).range(1..))]
    pub per_class: u64,
    #[arg(long, default_value_t = DEFAULT_PADDING_FRACTION)]
    pub padding: f64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Corpus directory containing manifest.tsv.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `key = value` file; flags given here take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight file to write; the log goes to `<out>.log`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Train on N train-split samples only, without dev evaluation.
    #[arg(long, value_name = "N")]
    pub overfit: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_size: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Writes `<report>.txt` and `<report>.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Face box `x,y,w,h`; defaults to a centered square.
    #[arg(long, allow_hyphen_values = true)]
    pub bbox: Option<BBox>,
    #[arg(long, default_value_t = DEFAULT_PADDING_FRACTION)]
    pub padding: f64,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Without a model the service starts degraded.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// `manifest` (box from the request), `center`, or `external:<url>`.
    #[arg(long, default_value = "center")]
    pub detector: DetectorBinding,
    /// Directory served under `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PADDING_FRACTION)]
    pub padding: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a).map(|()| ExitCode::SUCCESS),
        Command::Train(a) => commands::train(&a).map(|()| ExitCode::SUCCESS),
        Command::Eval(a) => commands::eval(&a).map(|()| ExitCode::SUCCESS),
        Command::Predict(a) => commands::predict(&a),
        Command::Serve(a) => commands::serve(&a).map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
