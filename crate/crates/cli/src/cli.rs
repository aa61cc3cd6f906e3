use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use snn_lab_core::train::LossKind;
use snn_lab_core::{Filter, NoiseKind, NoiseStage, Sharing, Waveform};

#[derive(Debug, Parser)]
#[command(name = "snn-lab", version, about = "Noise experiments on LIF neurons and a spiking MNIST classifier")]
pub struct Cli {
    /// Optional `key = value` file supplying defaults for any long flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Confusion counts of one noisy neuron against its clean run.
    SingleNeuron(SingleNeuronArgs),
    /// Train the 784-20-10 network on MNIST.
    Train(TrainArgs),
    /// Accuracy of a trained model under hidden-layer noise.
    NoiseSweep(NoiseSweepArgs),
    /// Accuracy of a trained model, optionally under one noise condition.
    Eval(EvalArgs),
    /// Download and unpack the MNIST IDX files.
    Fetch(FetchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputArg {
    Positive,
    Posneg,
}

impl InputArg {
    pub fn waveform(self) -> Waveform {
        match self {
            InputArg::Positive => Waveform::PositiveHarmonic,
            InputArg::Posneg => Waveform::PosNegHarmonic,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InputArg::Positive => "positive",
            InputArg::Posneg => "posneg",
        }
    }
}

/// Intensity grid: an explicit list, or log-spaced points.
#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub dmin: Option<f64>,
    #[arg(long)]
    pub dmax: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Comma-separated intensities; overrides --dmin/--dmax/--points.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct SingleNeuronArgs {
    #[arg(long, value_enum)]
    pub input: Option<InputArg>,
    /// Noise stage; input and membrane when omitted.
    #[arg(long)]
    pub stage: Option<NoiseStage>,
    /// Noise kind; additive and multiplicative when omitted.
    #[arg(long)]
    pub kind: Option<NoiseKind>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// CSV path; the figure is written next to it with an .svg extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub filter: Option<Filter>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub timesteps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub loss: Option<LossKind>,
    /// Add bias terms to both linear maps.
    #[arg(long)]
    pub biases: bool,
    /// Train on the first N training images only.
    #[arg(long)]
    pub train_subset: Option<usize>,
    /// Evaluate on the first N test images only.
    #[arg(long)]
    pub test_subset: Option<usize>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub log_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NoiseSweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub sharing: Option<Sharing>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of test images; 0 uses the whole test set.
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub stage: Option<NoiseStage>,
    #[arg(long)]
    pub kind: Option<NoiseKind>,
    #[arg(long)]
    pub sharing: Option<Sharing>,
    /// Noise intensity; no noise when omitted.
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FetchArgs {
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// URL or local directory holding the four `.gz` files.
    #[arg(long)]
    pub base_url: Option<String>,
}
