//! `knife` command-line front end.

mod commands;
mod provenance;
mod svg;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "knife", version, about = "Domain-generalizing training for multichannel time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic multi-domain benchmark as KTRL files.
    Synth(SynthArgs),
    /// Spectrally transfer trials across domains and report similarity.
    Augment(AugmentArgs),
    /// Train the phase teacher on source domains.
    TrainTeacher(TrainTeacherArgs),
    /// Train a student against a frozen teacher.
    TrainStudent(TrainStudentArgs),
    /// Score a checkpoint on datasets.
    Evaluate(EvaluateArgs),
    /// Leave-one-domain-out ablation over the loss configurations.
    Ablate(AblateArgs),
    /// Paired t-test between two methods or two score lists.
    Ttest(TtestArgs),
    /// Band-power contrast before and after spectral transfer.
    Erdplot(ErdArgs),
    /// Print the header of KTRL or checkpoint files.
    Describe(DescribeArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    /// Short schedule sized for the synthetic benchmark.
    Desk,
    /// 120 epochs at lr 0.005.
    Full,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed. Falls back to KNIFE_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training schedule preset, applied below the config file.
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,
    /// Override one config key, e.g. `--set gamma2=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Weight of the distillation loss.
    #[arg(long)]
    pub gamma1: Option<f64>,
    /// Weight of the alignment loss.
    #[arg(long)]
    pub gamma2: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct DataFlags {
    /// KTRL files or directories of them.
    #[arg(long, num_args = 1.., required = true)]
    pub data: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Built-in generator preset.
    #[arg(long, conflicts_with = "spec")]
    pub preset: Option<String>,
    /// JSON generator spec instead of a preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Override trials per domain.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataFlags,
    /// Swap ratio: a number in (0, 0.5) or `uniform`.
    #[arg(long)]
    pub alpha: Option<String>,
}

#[derive(Args, Debug)]
pub struct TrainTeacherArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Args, Debug)]
pub struct TrainStudentArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Teacher checkpoint from `train-teacher`.
    #[arg(long, required = true)]
    pub teacher: PathBuf,
    /// Loss configuration.
    #[arg(long, default_value = "knife", value_parser = ["erm", "mse_only", "align_only", "knife"])]
    pub arm: String,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataFlags,
    #[arg(long, required = true)]
    pub model: PathBuf,
    /// Method name written to the results table.
    #[arg(long, default_value = "model")]
    pub name: String,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Built-in generator preset (default phase2x4 when no --data).
    #[arg(long, conflicts_with = "data")]
    pub preset: Option<String>,
    /// KTRL files or directories, one per domain.
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Override trials per domain of the preset.
    #[arg(long, conflicts_with = "data")]
    pub trials: Option<usize>,
    /// Number of seeds, counted up from --seed.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Arms to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = ["erm".to_string(), "mse_only".into(), "align_only".into(), "knife".into()])]
    pub arms: Vec<String>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TtestArgs {
    #[command(flatten)]
    pub common: Common,
    /// Results CSV from `ablate` or `evaluate`.
    #[arg(long, requires_all = ["a", "b"], conflicts_with_all = ["x", "y"])]
    pub results: Option<PathBuf>,
    /// First method (tested as a − b).
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    /// Comma-separated paired scores.
    #[arg(long, value_delimiter = ',', requires = "y")]
    pub x: Vec<f64>,
    #[arg(long, value_delimiter = ',', requires = "x")]
    pub y: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct ErdArgs {
    #[command(flatten)]
    pub common: Common,
    /// Built-in generator preset (default erd2x4 when no --data).
    #[arg(long, conflicts_with = "data")]
    pub preset: Option<String>,
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Channels to report (default: all).
    #[arg(long, value_delimiter = ',')]
    pub channels: Vec<usize>,
    /// Band edges in Hz as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [8.0, 15.0])]
    pub band: Vec<f64>,
    /// Swap ratio: a number in (0, 0.5) or `uniform`.
    #[arg(long)]
    pub alpha: Option<String>,
}

#[derive(Args, Debug)]
pub struct DescribeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

/// A failure that exits with status 2 and usage text.
#[derive(Debug)]
pub struct UsageError(pub String);

pub enum Failure {
    Usage(UsageError),
    Runtime(knife::Error),
}

impl From<knife::Error> for Failure {
    fn from(e: knife::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::run(cli.command, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(UsageError(msg))) => {
            let _ = Cli::command().error(ErrorKind::ArgumentConflict, msg).print();
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            let line = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error: {line}");
            ExitCode::from(1)
        }
    }
}
