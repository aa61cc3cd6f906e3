//! Gaussian white noise injected into a population of LIF neurons.
//!
//! A noisy signal is `x* = x * (1 + sqrt(2 D_M) xi_M) + sqrt(2 D_A) xi_A` with
//! `xi_A`, `xi_M` independent standard normals. Noise can enter at the input
//! current, at the membrane potential, or at the emitted spike signal.
//!
//! Membrane noise perturbs the potential that is compared against the
//! threshold in that step. The spike it causes (or suppresses) resets the
//! neuron as usual, but the perturbation itself is not carried into the
//! stored potential. Spike-output noise leaves the neuron's own dynamics
//! untouched and only changes what is sent downstream.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lif::{LifParams, NeuronState, StepRecord};
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Additive,
    Multiplicative,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseStage {
    InputCurrent,
    MembranePotential,
    SpikeOutput,
}

/// Whether every neuron of a layer sees the same realization at a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sharing {
    Common,
    Uncommon,
}

impl NoiseKind {
    pub const SINGLE: [NoiseKind; 2] = [NoiseKind::Additive, NoiseKind::Multiplicative];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Additive => "additive",
            NoiseKind::Multiplicative => "multiplicative",
            NoiseKind::Both => "both",
        }
    }
}

impl NoiseStage {
    pub const ALL: [NoiseStage; 3] = [
        NoiseStage::InputCurrent,
        NoiseStage::MembranePotential,
        NoiseStage::SpikeOutput,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseStage::InputCurrent => "input",
            NoiseStage::MembranePotential => "membrane",
            NoiseStage::SpikeOutput => "spike",
        }
    }
}

impl Sharing {
    pub const ALL: [Sharing; 2] = [Sharing::Common, Sharing::Uncommon];

    pub fn name(self) -> &'static str {
        match self {
            Sharing::Common => "common",
            Sharing::Uncommon => "uncommon",
        }
    }
}

macro_rules! name_impls {
    ($ty:ty, $($text:literal => $variant:expr),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok($variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} '{other}'",
                        stringify!($ty)
                    ))),
                }
            }
        }
    };
}

name_impls!(NoiseKind, "additive" => NoiseKind::Additive, "multiplicative" => NoiseKind::Multiplicative, "both" => NoiseKind::Both);
name_impls!(NoiseStage, "input" => NoiseStage::InputCurrent, "membrane" => NoiseStage::MembranePotential, "spike" => NoiseStage::SpikeOutput);
name_impls!(Sharing, "common" => Sharing::Common, "uncommon" => Sharing::Uncommon);

/// One complete noise condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub stage: NoiseStage,
    pub sharing: Sharing,
    pub d_a: f64,
    pub d_m: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(
        kind: NoiseKind,
        stage: NoiseStage,
        sharing: Sharing,
        d_a: f64,
        d_m: f64,
        seed: u64,
    ) -> Result<Self> {
        let config = Self {
            kind,
            stage,
            sharing,
            d_a,
            d_m,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Single intensity `d` applied to whichever source(s) `kind` selects.
    pub fn with_intensity(
        kind: NoiseKind,
        stage: NoiseStage,
        sharing: Sharing,
        d: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::new(kind, stage, sharing, d, d, seed)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, d) in [("d_a", self.d_a), ("d_m", self.d_m)] {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {d}"
                )));
            }
        }
        Ok(())
    }

    /// `(d_a, d_m)` after masking the source that `kind` switches off.
    pub fn effective(&self) -> (f64, f64) {
        match self.kind {
            NoiseKind::Additive => (self.d_a, 0.0),
            NoiseKind::Multiplicative => (0.0, self.d_m),
            NoiseKind::Both => (self.d_a, self.d_m),
        }
    }

    pub fn is_silent(&self) -> bool {
        self.effective() == (0.0, 0.0)
    }

    pub fn stream(&self, trial: u64) -> NoiseStream {
        NoiseStream {
            rng: CounterRng::new(self.seed),
            trial,
            sharing: self.sharing,
        }
    }
}

const COMMON_LANE: u32 = u32::MAX;

/// Random-stream state for one trial: `(seed, trial)` fixed, indexed by step.
#[derive(Debug, Clone, Copy)]
pub struct NoiseStream {
    rng: CounterRng,
    trial: u64,
    sharing: Sharing,
}

impl NoiseStream {
    pub fn trial(&self) -> u64 {
        self.trial
    }

    /// Fill `xi_a` and `xi_m` with the draws for step `t`.
    pub fn fill(&self, t: usize, xi_a: &mut [f64], xi_m: &mut [f64]) {
        debug_assert_eq!(xi_a.len(), xi_m.len());
        let step = t as u32;
        match self.sharing {
            Sharing::Common => {
                let (a, m) = self.rng.normal_pair(self.trial, step, COMMON_LANE);
                xi_a.fill(a);
                xi_m.fill(m);
            }
            Sharing::Uncommon => {
                for (lane, (a, m)) in xi_a.iter_mut().zip(xi_m.iter_mut()).enumerate() {
                    (*a, *m) = self.rng.normal_pair(self.trial, step, lane as u32);
                }
            }
        }
    }
}

/// Draw the additive and multiplicative sources for `n_neurons` at step `t`.
pub fn sample_noise(
    config: &NoiseConfig,
    trial: u64,
    t: usize,
    n_neurons: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut xi_a = vec![0.0; n_neurons];
    let mut xi_m = vec![0.0; n_neurons];
    config.stream(trial).fill(t, &mut xi_a, &mut xi_m);
    (xi_a, xi_m)
}

#[inline]
fn gains(d_a: f64, d_m: f64) -> (f64, f64) {
    ((2.0 * d_a).sqrt(), (2.0 * d_m).sqrt())
}

fn check_intensities(d_a: f64, d_m: f64) -> Result<()> {
    if d_a < 0.0 || d_m < 0.0 || d_a.is_nan() || d_m.is_nan() {
        return Err(Error::Config(format!(
            "noise intensities must be non-negative, got d_a={d_a}, d_m={d_m}"
        )));
    }
    Ok(())
}

/// `signal_i * (1 + sqrt(2 d_m) xi_m_i) + sqrt(2 d_a) xi_a_i`
pub fn inject(
    signal: &[f64],
    xi_a: &[f64],
    xi_m: &[f64],
    d_a: f64,
    d_m: f64,
) -> Result<Vec<f64>> {
    check_intensities(d_a, d_m)?;
    for v in [xi_a, xi_m] {
        if v.len() != signal.len() {
            return Err(Error::LengthMismatch {
                expected: signal.len(),
                actual: v.len(),
            });
        }
    }
    let mut out = signal.to_vec();
    inject_in_place(&mut out, xi_a, xi_m, d_a, d_m);
    Ok(out)
}

#[inline]
fn inject_in_place(signal: &mut [f64], xi_a: &[f64], xi_m: &[f64], d_a: f64, d_m: f64) {
    if d_a == 0.0 && d_m == 0.0 {
        return;
    }
    let (ga, gm) = gains(d_a, d_m);
    for ((x, a), m) in signal.iter_mut().zip(xi_a).zip(xi_m) {
        *x = *x * (1.0 + gm * m) + ga * a;
    }
}

/// Reusable buffers for stepping a noisy population.
#[derive(Debug, Clone, Default)]
pub struct NoiseScratch {
    xi_a: Vec<f64>,
    xi_m: Vec<f64>,
    work: Vec<f64>,
}

impl NoiseScratch {
    pub fn new(n: usize) -> Self {
        Self {
            xi_a: vec![0.0; n],
            xi_m: vec![0.0; n],
            work: vec![0.0; n],
        }
    }

    /// Noisy membrane potentials of the last membrane-stage step.
    pub fn membrane(&self) -> &[f64] {
        &self.work
    }

    fn resize(&mut self, n: usize) {
        self.xi_a.resize(n, 0.0);
        self.xi_m.resize(n, 0.0);
        self.work.resize(n, 0.0);
    }
}

/// Step a population in place under `noise` (or cleanly when `None`).
///
/// Writes each neuron's spike into `spikes` and the signal it emits
/// downstream into `emitted`. Only spike-output noise makes the two differ.
/// Under active membrane noise the perturbed potentials that were compared
/// against the threshold are left in [`NoiseScratch::membrane`].
#[allow(clippy::too_many_arguments)]
pub fn step_population(
    states: &mut [NeuronState],
    i_in: &[f64],
    params: &LifParams,
    noise: Option<(&NoiseConfig, &NoiseStream)>,
    t: usize,
    spikes: &mut [bool],
    emitted: &mut [f64],
    scratch: &mut NoiseScratch,
) {
    let n = states.len();
    let active = noise.filter(|(c, _)| !c.is_silent());
    let Some((config, stream)) = active else {
        for k in 0..n {
            let s = &mut states[k];
            s.u_mem = params.integrate(s.u_mem, s.last_spike, i_in[k]);
            s.last_spike = params.fires(s.u_mem);
            spikes[k] = s.last_spike;
            emitted[k] = if s.last_spike { 1.0 } else { 0.0 };
        }
        return;
    };

    scratch.resize(n);
    stream.fill(t, &mut scratch.xi_a, &mut scratch.xi_m);
    let (d_a, d_m) = config.effective();
    let NoiseScratch { xi_a, xi_m, work } = scratch;

    match config.stage {
        NoiseStage::InputCurrent => {
            work.copy_from_slice(i_in);
            inject_in_place(work, xi_a, xi_m, d_a, d_m);
            for k in 0..n {
                let s = &mut states[k];
                s.u_mem = params.integrate(s.u_mem, s.last_spike, work[k]);
                s.last_spike = params.fires(s.u_mem);
            }
        }
        NoiseStage::MembranePotential => {
            for k in 0..n {
                let s = &states[k];
                work[k] = params.integrate(s.u_mem, s.last_spike, i_in[k]);
            }
            inject_in_place(work, xi_a, xi_m, d_a, d_m);
            for k in 0..n {
                let s = &mut states[k];
                s.u_mem = params.integrate(s.u_mem, s.last_spike, i_in[k]);
                s.last_spike = params.fires(work[k]);
            }
        }
        NoiseStage::SpikeOutput => {
            for k in 0..n {
                let s = &mut states[k];
                s.u_mem = params.integrate(s.u_mem, s.last_spike, i_in[k]);
                s.last_spike = params.fires(s.u_mem);
            }
        }
    }

    for k in 0..n {
        spikes[k] = states[k].last_spike;
        emitted[k] = if spikes[k] { 1.0 } else { 0.0 };
    }
    if config.stage == NoiseStage::SpikeOutput {
        inject_in_place(emitted, xi_a, xi_m, d_a, d_m);
    }
}

/// Result of one noisy population step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyStep {
    pub states: Vec<NeuronState>,
    pub records: Vec<StepRecord>,
    /// Signal passed downstream: `S*` under spike-output noise, else `S`.
    pub emitted: Vec<f64>,
}

/// Advance every neuron of a population by one step under `config`.
///
/// `i_in` holds one input current per neuron; `t` indexes the noise stream.
pub fn noisy_lif_step(
    states: &[NeuronState],
    i_in: &[f64],
    params: &LifParams,
    config: &NoiseConfig,
    stream: &NoiseStream,
    t: usize,
) -> Result<NoisyStep> {
    config.validate()?;
    params.validate()?;
    if i_in.len() != states.len() {
        return Err(Error::LengthMismatch {
            expected: states.len(),
            actual: i_in.len(),
        });
    }
    if let Some(bad) = i_in.iter().find(|v| !v.is_finite()) {
        return Err(Error::NumericDomain(format!("input current {bad}")));
    }
    if let Some(bad) = states.iter().find(|s| !s.u_mem.is_finite()) {
        return Err(Error::NumericDomain(format!(
            "membrane potential {}",
            bad.u_mem
        )));
    }

    let n = states.len();
    let mut next = states.to_vec();
    let mut spikes = vec![false; n];
    let mut emitted = vec![0.0; n];
    let mut scratch = NoiseScratch::new(n);
    step_population(
        &mut next,
        i_in,
        params,
        Some((config, stream)),
        t,
        &mut spikes,
        &mut emitted,
        &mut scratch,
    );

    // Report the current each neuron actually integrated.
    let effective_input: Vec<f64> = if config.stage == NoiseStage::InputCurrent && !config.is_silent() {
        let (d_a, d_m) = config.effective();
        let (xi_a, xi_m) = sample_noise(config, stream.trial(), t, n);
        inject(i_in, &xi_a, &xi_m, d_a, d_m)?
    } else {
        i_in.to_vec()
    };

    let membrane_noise = config.stage == NoiseStage::MembranePotential && !config.is_silent();
    let records = next
        .iter()
        .zip(&effective_input)
        .enumerate()
        .map(|(k, (s, &i))| StepRecord {
            i_in: i,
            u_mem: if membrane_noise { scratch.membrane()[k] } else { s.u_mem },
            spike: s.last_spike,
        })
        .collect();
    Ok(NoisyStep {
        states: next,
        records,
        emitted,
    })
}

/// Single neuron driven by `inputs` under `config`; returns the step records
/// and the emitted signal.
pub fn noisy_lif_run(
    inputs: &[f64],
    params: &LifParams,
    config: &NoiseConfig,
    trial: u64,
) -> Result<(Vec<StepRecord>, Vec<f64>)> {
    config.validate()?;
    params.validate()?;
    if let Some(bad) = inputs.iter().find(|v| !v.is_finite()) {
        return Err(Error::NumericDomain(format!("input current {bad}")));
    }
    let stream = config.stream(trial);
    let membrane_noise = config.stage == NoiseStage::MembranePotential && !config.is_silent();
    let mut state = [NeuronState::default()];
    let mut spike = [false];
    let mut emitted = [0.0];
    let mut scratch = NoiseScratch::new(1);
    let mut records = Vec::with_capacity(inputs.len());
    let mut out = Vec::with_capacity(inputs.len());
    for (t, &i) in inputs.iter().enumerate() {
        step_population(
            &mut state,
            &[i],
            params,
            Some((config, &stream)),
            t,
            &mut spike,
            &mut emitted,
            &mut scratch,
        );
        records.push(StepRecord {
            i_in: i,
            u_mem: if membrane_noise { scratch.membrane()[0] } else { state[0].u_mem },
            spike: spike[0],
        });
        out.push(emitted[0]);
    }
    Ok((records, out))
}
