use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rflab_core::dsp::{DecimationMode, FeatureKind};
use rflab_core::sim::Scenario;
use rflab_core::train::Stage;

#[derive(Debug, Parser)]
#[command(name = "rflab", version, about = "Bluetooth RF fingerprinting toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a labeled dataset from emitter, hop and channel configs.
    Simulate(SimulateArgs),
    /// Turn a raw IQ capture into a feature tensor file.
    Features(FeaturesArgs),
    /// Train Mbed (stage one) and/or the ATN (stage two).
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split and write a KPI report.
    Eval(EvalArgs),
    /// Print parameter, FLOP and memory estimates.
    Complexity(ComplexityArgs),
    /// Write Mbed embeddings of every example as CSV.
    ExportFeatures(ExportArgs),
    /// Re-execute a command from its run.json.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Plain,
    Aa,
}

impl From<ModeArg> for DecimationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Plain => DecimationMode::Plain,
            ModeArg::Aa => DecimationMode::AntiAliased,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    /// Magnitude, phase and PSD rows.
    MagPhasePsd,
    /// In-phase and quadrature rows.
    RawIq,
}

impl From<KindArg> for FeatureKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::MagPhasePsd => FeatureKind::MagPhasePsd,
            KindArg::RawIq => FeatureKind::RawIq,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StageArg {
    One,
    Two,
    Both,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::One => Stage::One,
            StageArg::Two => Stage::Two,
            StageArg::Both => Stage::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    Tts,
    Ttd,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Tts => Scenario::Tts,
            ScenarioArg::Ttd => Scenario::Ttd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    MbedAtn,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON array of emitter profiles, one per class.
    #[arg(long)]
    pub profiles: PathBuf,
    /// JSON hop configuration.
    #[arg(long)]
    pub hops: PathBuf,
    /// JSON object with `train` and `test` channel models.
    #[arg(long)]
    pub channels: PathBuf,
    /// Examples per class.
    #[arg(long)]
    pub n: usize,
    /// Feature length after decimation.
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "mag-phase-psd")]
    pub features: KindArg,
    #[arg(long)]
    pub seed: u64,
    /// Output directory for manifest.json and tensors/.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub capture: PathBuf,
    /// JSON capture descriptor (scalar format, endianness, sample rate).
    #[arg(long)]
    pub descriptor: PathBuf,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "mag-phase-psd")]
    pub features: KindArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest.json.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "mbed-atn")]
    pub model: ModelArg,
    /// Channel-width multiplier; stage two takes it from the checkpoint.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Overrides the `stage` field of the config.
    #[arg(long, value_enum)]
    pub stage: Option<StageArg>,
    /// JSON training config; defaults apply to omitted fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint directory (read by stage two, written by every stage).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    /// Report JSON path; the confusion matrix goes next to it as CSV.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    #[arg(long, value_enum, default_value = "mbed-atn")]
    pub model: ModelArg,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 4)]
    pub bytes_per_scalar: u64,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
    /// Also write report.json, report.txt and run.json into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// run.json written by an earlier command.
    #[arg(long)]
    pub run: PathBuf,
    /// Replacement output path (directory or file, as the command expects).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
