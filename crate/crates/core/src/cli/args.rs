use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::DatasetFormat;

#[derive(Debug, Parser)]
#[command(
    name = "fedx",
    version,
    about = "Unsupervised federated learning with two-sided distillation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run federated training and write metrics and checkpoints.
    Train(TrainArgs),
    /// Linear or semi-supervised evaluation of a checkpoint.
    Eval(EvalArgs),
    /// Draw a Dirichlet partition and print its per-client histograms.
    Partition(PartitionArgs),
    /// Local-vs-global embedding angles and inter-class prototype angles.
    Angles(AnglesArgs),
}

#[derive(Debug, Default, Args)]
pub struct TrainArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub local_epochs: Option<usize>,
    #[arg(long)]
    pub clients: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Any config key, e.g. `--set federation.loss.tau=0.2`. Applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    #[default]
    Linear,
    Semi,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub format: Option<DatasetFormat>,
    /// `C,H,W` for CSV images.
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<(usize, usize, usize)>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Run configuration supplying dataset paths and evaluation settings.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Labeled training split.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, value_enum, default_value_t)]
    pub mode: EvalMode,
    #[arg(long)]
    pub label_ratio: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; defaults to `eval_<mode>.json` beside the checkpoint.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value_t = 10)]
    pub clients: usize,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Smallest acceptable client shard.
    #[arg(long, default_value_t = 1)]
    pub min_size: usize,
    /// Save the partition as JSON for reuse.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Print per-client class histograms.
    #[arg(long)]
    pub inspect: bool,
}

#[derive(Debug, Args)]
pub struct AnglesArgs {
    #[arg(long)]
    pub local: PathBuf,
    #[arg(long)]
    pub global: PathBuf,
    /// Labeled test set.
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Report path; defaults to `angles.json` beside the local checkpoint.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

fn parse_shape(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(format!("expected C,H,W, got {s:?}")),
    }
}
