//! Harmonic test currents, confusion scoring and single-neuron noise sweeps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lif::{lif_run, spike_train, LifParams, NeuronState};
use crate::noise::{noisy_lif_run, NoiseConfig, NoiseKind, NoiseStage, Sharing};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    /// `(1 + sin(3 pi t)) / 2`, always in `[0, 1]`.
    PositiveHarmonic,
    /// `sin(3 pi t)`, swinging through negative values.
    PosNegHarmonic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputSignal {
    pub waveform: Waveform,
    pub n_steps: usize,
    pub dt: f64,
}

impl InputSignal {
    pub const DEFAULT_STEPS: usize = 200;
    pub const DEFAULT_DT: f64 = 0.01;

    pub fn new(waveform: Waveform) -> Self {
        Self {
            waveform,
            n_steps: Self::DEFAULT_STEPS,
            dt: Self::DEFAULT_DT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("input signal needs at least one step".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

pub fn gen_input(signal: &InputSignal) -> Result<Vec<f64>> {
    signal.validate()?;
    let omega = 3.0 * std::f64::consts::PI;
    Ok((0..signal.n_steps)
        .map(|k| {
            let s = (omega * k as f64 * signal.dt).sin();
            match signal.waveform {
                Waveform::PositiveHarmonic => 0.5 * (1.0 + s),
                Waveform::PosNegHarmonic => s,
            }
        })
        .collect())
}

/// Per-step comparison of a noisy spike train against its clean reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Spikes in the reference train.
    pub fn reference_spikes(&self) -> usize {
        self.tp + self.fn_
    }

    /// Spikes in the noisy train.
    pub fn noisy_spikes(&self) -> usize {
        self.tp + self.fp
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.tp, self.fp, self.tn, self.fn_]
    }
}

pub fn score_spikes(reference: &[bool], noisy: &[bool]) -> Result<ConfusionCounts> {
    if reference.len() != noisy.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: noisy.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&r, &n) in reference.iter().zip(noisy) {
        match (r, n) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation over repetitions.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// All repetitions at one noise intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub d: f64,
    pub trials: Vec<ConfusionCounts>,
}

impl SweepPoint {
    fn stat(&self, pick: impl Fn(&ConfusionCounts) -> usize) -> MeanStd {
        MeanStd::of(self.trials.iter().map(|c| pick(c) as f64))
    }

    pub fn tp(&self) -> MeanStd {
        self.stat(|c| c.tp)
    }

    pub fn fp(&self) -> MeanStd {
        self.stat(|c| c.fp)
    }

    pub fn tn(&self) -> MeanStd {
        self.stat(|c| c.tn)
    }

    pub fn fn_(&self) -> MeanStd {
        self.stat(|c| c.fn_)
    }

    pub fn spike_count(&self) -> MeanStd {
        self.stat(|c| c.noisy_spikes())
    }
}

/// `points` log-spaced intensities over `[d_min, d_max]`.
pub fn log_grid(d_min: f64, d_max: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::Empty("intensity grid"));
    }
    if !(d_min > 0.0 && d_max >= d_min && d_max.is_finite()) {
        return Err(Error::Config(format!(
            "log grid needs 0 < d_min <= d_max, got [{d_min}, {d_max}]"
        )));
    }
    if points == 1 {
        return Ok(vec![d_min]);
    }
    let (lo, hi) = (d_min.log10(), d_max.log10());
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i == points - 1 {
                d_max
            } else if i == 0 {
                d_min
            } else {
                10f64.powf(lo + step * i as f64)
            }
        })
        .collect())
}

/// Parameters of a single-neuron sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleNeuronSweep {
    pub signal: InputSignal,
    pub params: LifParams,
    pub stage: NoiseStage,
    pub kind: NoiseKind,
    pub d_grid: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
}

impl SingleNeuronSweep {
    pub const DEFAULT_REPS: usize = 100;
}

/// Clean spike train of a single neuron for `signal`.
pub fn reference_train(signal: &InputSignal, params: &LifParams) -> Result<Vec<bool>> {
    let inputs = gen_input(signal)?;
    Ok(spike_train(&lif_run(&inputs, params, NeuronState::default())?))
}

/// Score `reps` noisy runs at every grid intensity against one clean run.
///
/// Repetition `r` uses trial id `r` at every intensity, so neighbouring grid
/// points share their underlying noise realizations.
pub fn single_neuron_sweep(sweep: &SingleNeuronSweep) -> Result<Vec<SweepPoint>> {
    if sweep.d_grid.is_empty() {
        return Err(Error::Empty("intensity grid"));
    }
    if sweep.reps == 0 {
        return Err(Error::Config("at least one repetition is required".into()));
    }
    if sweep.d_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("intensity grid must be sorted ascending".into()));
    }
    sweep.params.validate()?;
    let inputs = gen_input(&sweep.signal)?;
    let reference = spike_train(&lif_run(&inputs, &sweep.params, NeuronState::default())?);

    sweep
        .d_grid
        .iter()
        .map(|&d| {
            let config = NoiseConfig::with_intensity(
                sweep.kind,
                sweep.stage,
                Sharing::Uncommon,
                d,
                sweep.seed,
            )?;
            let trials = (0..sweep.reps)
                .into_par_iter()
                .map(|rep| {
                    let (records, _) =
                        noisy_lif_run(&inputs, &sweep.params, &config, rep as u64)?;
                    score_spikes(&reference, &spike_train(&records))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepPoint { d, trials })
        })
        .collect()
}
