use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod svg;

pub use config::RunConfig;

/// Failure classes, mapped to distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or inputs (exit code 1).
    Validation(String),
    /// Failure while doing the work, including numeric breakdown (exit code 2).
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<pu3_core::Error> for CliError {
    fn from(e: pu3_core::Error) -> Self {
        use pu3_core::Error as E;
        match e {
            E::NonFinite(_) | E::NonFiniteLoss { .. } | E::NotScalar(_) | E::Io { .. } => {
                CliError::Runtime(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

const AFTER_HELP: &str = "Settings resolve in this order: command-line flags, then the \
--config file (flat `key = value` lines), then built-in defaults.\n\
Exit codes: 0 success, 1 invalid input or configuration, 2 runtime or numeric failure.";

#[derive(Parser)]
#[command(name = "pu3", version, about = "Progressive patch-based point set upsampling", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic curve dataset.
    GenData(GenDataArgs),
    /// Train the cascade progressively.
    Train(TrainArgs),
    /// Upsample a point file with a trained checkpoint.
    Upsample(UpsampleArgs),
    /// Compute metrics, robustness sweeps and plots.
    Eval(EvalArgs),
}

#[derive(Args)]
pub struct ConfigArg {
    /// Flat `key = value` settings file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Number of curves [default: 80]
    #[arg(long)]
    pub curves: Option<usize>,
    /// Input points per curve [default: 50]
    #[arg(long)]
    pub n0: Option<usize>,
    /// Reference levels per curve [default: 4]
    #[arg(long)]
    pub levels: Option<usize>,
    /// Generator seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of curves held out for testing [default: 0.2]
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of 2× units [default: 4]
    #[arg(long)]
    pub levels: Option<usize>,
    /// Points per input patch [default: 50]
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Optimizer steps per stage [default: 500]
    #[arg(long)]
    pub steps_per_stage: Option<usize>,
    /// Patches per step [default: 28]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Initialization and sampling seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for checkpoints and the loss log.
    #[arg(long)]
    pub out: PathBuf,
    /// Sum the loss over every level up to the target.
    #[arg(long)]
    pub loss_all_levels: bool,
    /// Group dense-block neighborhoods by coordinates instead of features.
    #[arg(long)]
    pub no_feature_knn: bool,
    /// Chain dense layers without within-block concatenation.
    #[arg(long)]
    pub no_dense_links: bool,
    /// Continue after the latest checkpoint in --out.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Args)]
pub struct UpsampleArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Units to apply [default: all trained units]
    #[arg(long)]
    pub levels: Option<usize>,
    /// Patch count factor: ceil(coverage · points / patch size) seeds [default: 3]
    #[arg(long)]
    pub coverage: Option<f64>,
    /// Points per patch [default: 50]
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Predicted points (single evaluation).
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Reference points (single evaluation).
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Dataset directory, for curve lookup or sweeps.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Dataset entry whose curve gives the point-to-curve distance.
    #[arg(long)]
    pub example: Option<String>,
    /// Checkpoint used by sweeps.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Dataset split swept over: train, test or all.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Units applied during sweeps [default: all trained units]
    #[arg(long)]
    pub levels: Option<usize>,
    /// Comma-separated noise levels, as fractions of the bounding-box diagonal.
    #[arg(long, num_args = 0..=1, default_missing_value = "0,0.0025,0.005,0.01,0.015,0.02")]
    pub sweep_noise: Option<String>,
    /// Comma-separated fractions of input points to drop.
    #[arg(long, num_args = 0..=1, default_missing_value = "0,0.1,0.2,0.3,0.4,0.5")]
    pub sweep_drop: Option<String>,
    /// Perturbation seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report file (key = value record, or CSV for sweeps).
    #[arg(long)]
    pub out: PathBuf,
    /// SVG scatter of the evaluated points colored by distance to the reference.
    #[arg(long, value_name = "FILE")]
    pub plot: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train(a) => commands::train(&a),
        Command::Upsample(a) => commands::upsample(&a),
        Command::Eval(a) => commands::eval(&a),
    }
}

fn main() -> ExitCode {
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Validation(_) => 1,
                CliError::Runtime(_) => 2,
            })
        }
    }
}
