//! Feed-forward spiking classifier: constant-current input, one pre-filtered
//! hidden LIF layer (where internal noise lives) and a spiking output layer
//! read out by spike count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lif::{LifParams, NeuronState};
use crate::mnist::{Dataset, CLASSES, PIXELS};
use crate::noise::{step_population, NoiseConfig, NoiseScratch};

pub const HIDDEN: usize = 20;
pub const DEFAULT_WINDOW: usize = 200;

/// Squashing applied to the hidden layer's weighted input sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Filter {
    None,
    Sigmoid,
    Tanh,
}

impl Filter {
    pub const ALL: [Filter; 3] = [Filter::None, Filter::Sigmoid, Filter::Tanh];

    pub fn name(self) -> &'static str {
        match self {
            Filter::None => "none",
            Filter::Sigmoid => "sigmoid",
            Filter::Tanh => "tanh",
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Filter::None => 0,
            Filter::Sigmoid => 1,
            Filter::Tanh => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.id() == id)
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Filter::None => x,
            Filter::Sigmoid => sigmoid(x),
            Filter::Tanh => x.tanh(),
        }
    }

    /// Derivative at pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Filter::None => 1.0,
            Filter::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Filter::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Filter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Filter::None),
            "sigmoid" => Ok(Filter::Sigmoid),
            "tanh" => Ok(Filter::Tanh),
            other => Err(Error::Config(format!("unknown filter '{other}'"))),
        }
    }
}

pub fn apply_filter(pre_activations: &[f64], filter: Filter) -> Vec<f64> {
    pre_activations.iter().map(|&x| filter.apply(x)).collect()
}

/// Weights and settings of an `n_in → n_hidden → n_out` spiking network.
///
/// `w_in` is `n_in × n_hidden` and `w_out` is `n_hidden × n_out`, both
/// row-major, so `w_in[j * n_hidden + i]` connects input `j` to hidden `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub w_in: Vec<f64>,
    pub w_out: Vec<f64>,
    /// Present only when the model was built with biases.
    pub b_hidden: Option<Vec<f64>>,
    pub b_out: Option<Vec<f64>>,
    pub filter: Filter,
    pub lif: LifParams,
    pub t_window: usize,
}

impl NetworkModel {
    /// Uniform `±1/sqrt(fan_in)` initialization.
    pub fn init(
        n_in: usize,
        n_hidden: usize,
        n_out: usize,
        filter: Filter,
        lif: LifParams,
        t_window: usize,
        biases: bool,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |fan_in: usize, len: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..len).map(|_| rng.random_range(-bound..bound)).collect()
        };
        let w_in = layer(n_in, n_in * n_hidden);
        let w_out = layer(n_hidden, n_hidden * n_out);
        let (b_hidden, b_out) = if biases {
            (Some(layer(n_in, n_hidden)), Some(layer(n_hidden, n_out)))
        } else {
            (None, None)
        };
        let model = Self {
            n_in,
            n_hidden,
            n_out,
            w_in,
            w_out,
            b_hidden,
            b_out,
            filter,
            lif,
            t_window,
        };
        model.validate()?;
        Ok(model)
    }

    /// 784-20-10 with default LIF settings and a 200-step window.
    pub fn mnist(filter: Filter, seed: u64) -> Result<Self> {
        Self::init(
            PIXELS,
            HIDDEN,
            CLASSES,
            filter,
            LifParams::default(),
            DEFAULT_WINDOW,
            false,
            seed,
        )
    }

    pub fn has_biases(&self) -> bool {
        self.b_hidden.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        self.lif.validate()?;
        if self.t_window == 0 {
            return Err(Error::Config("time window must be at least 1 step".into()));
        }
        if self.n_in == 0 || self.n_hidden == 0 || self.n_out == 0 {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let shapes = [
            ("w_in", self.n_in * self.n_hidden, Some(self.w_in.len())),
            ("w_out", self.n_hidden * self.n_out, Some(self.w_out.len())),
            ("b_hidden", self.n_hidden, self.b_hidden.as_ref().map(Vec::len)),
            ("b_out", self.n_out, self.b_out.as_ref().map(Vec::len)),
        ];
        for (context, expected, actual) in shapes {
            if let Some(actual) = actual {
                if actual != expected {
                    return Err(Error::Dimension {
                        context,
                        expected,
                        actual,
                    });
                }
            }
        }
        if self.b_hidden.is_some() != self.b_out.is_some() {
            return Err(Error::Config("biases must be present on both layers or neither".into()));
        }
        let finite = self
            .w_in
            .iter()
            .chain(&self.w_out)
            .chain(self.b_hidden.iter().flatten())
            .chain(self.b_out.iter().flatten())
            .all(|w| w.is_finite());
        if !finite {
            return Err(Error::NumericDomain("non-finite weight".into()));
        }
        Ok(())
    }

    /// Weighted input sum per hidden neuron, before filtering.
    pub fn hidden_pre_activation(&self, image: &[f64]) -> Vec<f64> {
        let mut pre = match &self.b_hidden {
            Some(b) => b.clone(),
            None => vec![0.0; self.n_hidden],
        };
        for (j, &x) in image.iter().enumerate() {
            if x != 0.0 {
                let row = &self.w_in[j * self.n_hidden..(j + 1) * self.n_hidden];
                for (p, w) in pre.iter_mut().zip(row) {
                    *p += w * x;
                }
            }
        }
        pre
    }

    /// Filtered hidden drive; constant over the time window.
    pub fn hidden_drive(&self, image: &[f64]) -> Vec<f64> {
        apply_filter(&self.hidden_pre_activation(image), self.filter)
    }

    /// Output-layer input current for one emitted hidden signal.
    pub fn output_current(&self, emitted: &[f64], out: &mut [f64]) {
        match &self.b_out {
            Some(b) => out.copy_from_slice(b),
            None => out.fill(0.0),
        }
        for (h, &e) in emitted.iter().enumerate() {
            if e != 0.0 {
                let row = &self.w_out[h * self.n_out..(h + 1) * self.n_out];
                for (o, w) in out.iter_mut().zip(row) {
                    *o += w * e;
                }
            }
        }
    }
}

/// Spike rasters of a forward pass, indexed `[neuron][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub hidden: Vec<Vec<bool>>,
    pub output: Vec<Vec<bool>>,
    pub counts: Vec<usize>,
}

fn check_image(model: &NetworkModel, image: &[f64]) -> Result<()> {
    if image.len() != model.n_in {
        return Err(Error::Dimension {
            context: "input image",
            expected: model.n_in,
            actual: image.len(),
        });
    }
    if let Some(bad) = image.iter().find(|v| !v.is_finite()) {
        return Err(Error::NumericDomain(format!("pixel {bad}")));
    }
    Ok(())
}

/// Runs the time loop, handing each step's hidden and output spikes to `sink`.
fn simulate(
    model: &NetworkModel,
    image: &[f64],
    noise: Option<&NoiseConfig>,
    trial: u64,
    mut sink: impl FnMut(usize, &[bool], &[bool]),
) {
    let drive = model.hidden_drive(image);
    let stream = noise.map(|c| c.stream(trial));
    let noise = noise.zip(stream.as_ref());

    let mut hidden = vec![NeuronState::default(); model.n_hidden];
    let mut output = vec![NeuronState::default(); model.n_out];
    let mut h_spikes = vec![false; model.n_hidden];
    let mut h_emitted = vec![0.0; model.n_hidden];
    let mut o_spikes = vec![false; model.n_out];
    let mut o_emitted = vec![0.0; model.n_out];
    let mut current = vec![0.0; model.n_out];
    let mut scratch = NoiseScratch::new(model.n_hidden);
    let mut clean_scratch = NoiseScratch::default();

    for t in 0..model.t_window {
        step_population(
            &mut hidden,
            &drive,
            &model.lif,
            noise,
            t,
            &mut h_spikes,
            &mut h_emitted,
            &mut scratch,
        );
        model.output_current(&h_emitted, &mut current);
        step_population(
            &mut output,
            &current,
            &model.lif,
            None,
            t,
            &mut o_spikes,
            &mut o_emitted,
            &mut clean_scratch,
        );
        sink(t, &h_spikes, &o_spikes);
    }
}

/// Full forward pass with rasters. Noise, if any, acts on the hidden layer only.
pub fn forward(
    model: &NetworkModel,
    image: &[f64],
    noise: Option<&NoiseConfig>,
    trial: u64,
) -> Result<ForwardTrace> {
    model.validate()?;
    check_image(model, image)?;
    if let Some(c) = noise {
        c.validate()?;
    }
    let t_window = model.t_window;
    let mut trace = ForwardTrace {
        hidden: vec![vec![false; t_window]; model.n_hidden],
        output: vec![vec![false; t_window]; model.n_out],
        counts: vec![0; model.n_out],
    };
    simulate(model, image, noise, trial, |t, h, o| {
        for (row, &s) in trace.hidden.iter_mut().zip(h) {
            row[t] = s;
        }
        for ((row, count), &s) in trace.output.iter_mut().zip(trace.counts.iter_mut()).zip(o) {
            row[t] = s;
            *count += usize::from(s);
        }
    });
    Ok(trace)
}

/// Output spike counts only; the evaluation fast path.
pub fn forward_counts(
    model: &NetworkModel,
    image: &[f64],
    noise: Option<&NoiseConfig>,
    trial: u64,
) -> Vec<usize> {
    let mut counts = vec![0; model.n_out];
    simulate(model, image, noise, trial, |_, _, o| {
        for (c, &s) in counts.iter_mut().zip(o) {
            *c += usize::from(s);
        }
    });
    counts
}

/// Index of the largest count; ties go to the lowest index.
pub fn argmax_counts(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

pub fn classify(trace: &ForwardTrace) -> usize {
    argmax_counts(&trace.counts)
}

/// Trial id of one `(image, repetition)` pair.
#[inline]
pub fn trial_id(image: usize, rep: usize) -> u64 {
    ((rep as u64) << 32) | image as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyStats {
    /// Accuracy over all images and repetitions.
    pub mean: f64,
    /// Accuracy of each repetition over the dataset.
    pub per_rep: Vec<f64>,
}

impl AccuracyStats {
    pub fn std(&self) -> f64 {
        crate::signal::MeanStd::of(self.per_rep.iter().copied()).std
    }
}

/// Accuracy under `noise` averaged over `reps` independent noise draws per image.
///
/// The noise stream of image `i` in repetition `r` is keyed by
/// `(noise.seed, trial_id(i, r))`.
pub fn evaluate(
    model: &NetworkModel,
    dataset: &Dataset,
    noise: Option<&NoiseConfig>,
    reps: usize,
) -> Result<AccuracyStats> {
    if dataset.is_empty() {
        return Err(Error::Empty("evaluation dataset"));
    }
    if reps == 0 {
        return Err(Error::Config("at least one repetition is required".into()));
    }
    model.validate()?;
    if let Some(c) = noise {
        c.validate()?;
    }
    if model.n_in != PIXELS {
        return Err(Error::Dimension {
            context: "model input",
            expected: PIXELS,
            actual: model.n_in,
        });
    }
    let noisy = noise.filter(|c| !c.is_silent());
    let effective_reps = if noisy.is_some() { reps } else { 1 };

    let correct: Vec<usize> = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let image = dataset.image(i);
            let label = dataset.label(i);
            let mut hits = vec![0usize; effective_reps];
            for (rep, hit) in hits.iter_mut().enumerate() {
                let counts = forward_counts(model, &image, noisy, trial_id(i, rep));
                *hit = usize::from(argmax_counts(&counts) == label);
            }
            hits
        })
        .reduce(
            || vec![0; effective_reps],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let n = dataset.len() as f64;
    let per_rep: Vec<f64> = (0..reps)
        .map(|r| correct[r.min(effective_reps - 1)] as f64 / n)
        .collect();
    let mean = per_rep.iter().sum::<f64>() / reps as f64;
    Ok(AccuracyStats { mean, per_rep })
}
