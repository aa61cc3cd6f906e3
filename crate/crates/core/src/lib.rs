//! Leaky integrate-and-fire neurons under internal Gaussian noise.
//!
//! The crate covers the single-neuron picture (harmonic drive, noise at the
//! input current, membrane potential or spike output, confusion counts against
//! the clean run) and a small 784-20-10 spiking classifier for MNIST that is
//! trained with surrogate gradients and then evaluated with noise injected
//! into its hidden layer.

pub mod adam;
pub mod error;
pub mod lif;
pub mod mnist;
pub mod net;
pub mod noise;
pub mod rng;
pub mod signal;
pub mod train;

pub use error::{Error, Result};
pub use lif::{lif_run, lif_step, LifParams, NeuronState, StepRecord};
pub use mnist::Dataset;
pub use net::{classify, evaluate, forward, Filter, ForwardTrace, NetworkModel};
pub use noise::{inject, noisy_lif_step, sample_noise, NoiseConfig, NoiseKind, NoiseStage, Sharing};
pub use signal::{gen_input, score_spikes, single_neuron_sweep, ConfusionCounts, InputSignal, SweepPoint, Waveform};
pub use train::{train, TrainConfig};
