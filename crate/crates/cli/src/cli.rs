use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmc::loss::LossVariant;

#[derive(Debug, Parser)]
#[command(
    name = "gmc",
    version,
    about = "Multimodal contrastive training and geometric alignment evaluation"
)]
pub struct Cli {
    /// Worker threads for parallel sections; defaults to one per core.
    #[arg(long, global = true, env = "GMC_THREADS", value_name = "N")]
    pub threads: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic multimodal dataset.
    GenData(GenDataArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Encode a dataset split through one pathway.
    Encode(EncodeArgs),
    /// Score an evaluation embedding set against a reference set.
    EvalDca(EvalDcaArgs),
    /// Train a probe on complete latents and test it on every pathway.
    EvalProbe(EvalProbeArgs),
    /// Train and evaluate every point of a hyperparameter grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Full,
    Ablated,
}

impl From<LossArg> for LossVariant {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Full => LossVariant::Full,
            LossArg::Ablated => LossVariant::Ablated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum SplitArg {
    #[default]
    All,
    Train,
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Dataset directory written by `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// `complete` or a modality number starting at 1.
    #[arg(long, default_value = "complete")]
    pub pathway: String,
    #[arg(long, value_enum, default_value_t)]
    pub split: SplitArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalDcaArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub evaluation: PathBuf,
    /// Neighbours per vertex; falls back to `dca.k` of the configuration.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalProbeArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Loss for every grid point unless `sweep.loss_variant` lists some.
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long)]
    pub out: PathBuf,
}
