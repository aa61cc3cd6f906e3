//! Surrogate-gradient backpropagation through time.
//!
//! The forward pass is the noise-free network of [`crate::net`]. In the
//! backward pass the Heaviside spike derivative is replaced by an arctan
//! surrogate and, by default, the reset term is detached from the graph.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::adam::{AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::mnist::{batches, Dataset};
use crate::net::{argmax_counts, NetworkModel};

/// Surrogate for `dS/dU`: `slope / (1 + (pi * slope * (u - thr))^2)`.
///
/// Peaks at `slope` when `u == thr`, is even about the threshold and
/// integrates to one over the real line.
#[inline]
pub fn surrogate_spike_grad(u: f64, u_threshold: f64, slope: f64) -> f64 {
    let z = PI * slope * (u - u_threshold);
    slope / (1.0 + z * z)
}

/// Smooth spike function whose derivative is exactly the surrogate.
#[inline]
pub fn smooth_spike(u: f64, u_threshold: f64, slope: f64) -> f64 {
    0.5 + (PI * slope * (u - u_threshold)).atan() / PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Softmax cross-entropy on the output spike counts.
    SpikeCount,
    /// Softmax cross-entropy on the output membrane potential, summed over steps.
    Membrane,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::SpikeCount => "count",
            LossKind::Membrane => "membrane",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(LossKind::SpikeCount),
            "membrane" => Ok(LossKind::Membrane),
            other => Err(Error::Config(format!("unknown loss '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeFn {
    /// Hard threshold forward, surrogate backward.
    Heaviside,
    /// Smooth arctan forward; gradients are then exact.
    Smooth,
}

/// How one sample's gradient is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradOptions {
    pub slope: f64,
    pub loss: LossKind,
    pub spike_fn: SpikeFn,
    pub detach_reset: bool,
}

impl GradOptions {
    pub fn training(slope: f64, loss: LossKind) -> Self {
        Self {
            slope,
            loss,
            spike_fn: SpikeFn::Heaviside,
            detach_reset: true,
        }
    }

    /// Fully differentiable twin: smooth spikes, reset kept in the graph.
    pub fn smooth_twin(slope: f64, loss: LossKind) -> Self {
        Self {
            slope,
            loss,
            spike_fn: SpikeFn::Smooth,
            detach_reset: false,
        }
    }
}

/// Gradient buffers shaped like a model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w_in: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub b_out: Vec<f64>,
}

impl Gradients {
    pub fn zeros(model: &NetworkModel) -> Self {
        let nb = |b: &Option<Vec<f64>>| b.as_ref().map_or(0, Vec::len);
        Self {
            w_in: vec![0.0; model.w_in.len()],
            w_out: vec![0.0; model.w_out.len()],
            b_hidden: vec![0.0; nb(&model.b_hidden)],
            b_out: vec![0.0; nb(&model.b_out)],
        }
    }

    fn add(&mut self, other: &Gradients) {
        for (a, b) in [
            (&mut self.w_in, &other.w_in),
            (&mut self.w_out, &other.w_out),
            (&mut self.b_hidden, &other.b_hidden),
            (&mut self.b_out, &other.b_out),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn scale(&mut self, s: f64) {
        for v in [&mut self.w_in, &mut self.w_out, &mut self.b_hidden, &mut self.b_out] {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }
}

struct Tape {
    pre: Vec<f64>,
    // [t * n + k]
    u1: Vec<f64>,
    s1: Vec<f64>,
    u2: Vec<f64>,
    s2: Vec<f64>,
}

fn spike(u: f64, thr: f64, opts: &GradOptions) -> f64 {
    match opts.spike_fn {
        SpikeFn::Heaviside => {
            if u > thr {
                1.0
            } else {
                0.0
            }
        }
        SpikeFn::Smooth => smooth_spike(u, thr, opts.slope),
    }
}

fn record(model: &NetworkModel, image: &[f64], opts: &GradOptions) -> Tape {
    let (h, o, t_len) = (model.n_hidden, model.n_out, model.t_window);
    let lif = &model.lif;
    let gain = lif.input_gain();
    let thr = lif.u_threshold;
    let pre = model.hidden_pre_activation(image);
    let drive: Vec<f64> = pre.iter().map(|&x| model.filter.apply(x)).collect();

    let mut tape = Tape {
        pre,
        u1: vec![0.0; t_len * h],
        s1: vec![0.0; t_len * h],
        u2: vec![0.0; t_len * o],
        s2: vec![0.0; t_len * o],
    };
    let (mut u1, mut s1) = (vec![0.0; h], vec![0.0; h]);
    let (mut u2, mut s2) = (vec![0.0; o], vec![0.0; o]);
    let mut current = vec![0.0; o];
    for t in 0..t_len {
        for k in 0..h {
            u1[k] = lif.beta * u1[k] + gain * drive[k] - s1[k] * thr;
            s1[k] = spike(u1[k], thr, opts);
        }
        model.output_current(&s1, &mut current);
        for k in 0..o {
            u2[k] = lif.beta * u2[k] + gain * current[k] - s2[k] * thr;
            s2[k] = spike(u2[k], thr, opts);
        }
        tape.u1[t * h..(t + 1) * h].copy_from_slice(&u1);
        tape.s1[t * h..(t + 1) * h].copy_from_slice(&s1);
        tape.u2[t * o..(t + 1) * o].copy_from_slice(&u2);
        tape.s2[t * o..(t + 1) * o].copy_from_slice(&s2);
    }
    tape
}

/// `(loss, softmax - onehot)` for one logit vector.
fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

/// Result of one sample's forward and backward pass.
#[derive(Debug, Clone)]
pub struct SampleResult {
    pub loss: f64,
    /// Time-summed output spikes (real-valued under smooth spikes).
    pub counts: Vec<f64>,
}

fn losses(model: &NetworkModel, tape: &Tape, label: usize, loss: LossKind) -> (f64, Vec<f64>, Vec<f64>) {
    let (o, t_len) = (model.n_out, model.t_window);
    let mut counts = vec![0.0; o];
    for t in 0..t_len {
        for k in 0..o {
            counts[k] += tape.s2[t * o + k];
        }
    }
    match loss {
        LossKind::SpikeCount => {
            let (l, g) = cross_entropy(&counts, label);
            (l, g, counts)
        }
        LossKind::Membrane => {
            let mut total = 0.0;
            let mut direct = vec![0.0; t_len * o];
            for t in 0..t_len {
                let (l, g) = cross_entropy(&tape.u2[t * o..(t + 1) * o], label);
                total += l;
                direct[t * o..(t + 1) * o].copy_from_slice(&g);
            }
            (total, direct, counts)
        }
    }
}

/// Loss of one sample without gradients.
pub fn sample_loss(model: &NetworkModel, image: &[f64], label: usize, opts: &GradOptions) -> f64 {
    let tape = record(model, image, opts);
    losses(model, &tape, label, opts.loss).0
}

/// Forward pass plus BPTT for one sample, accumulating into `grads`.
pub fn accumulate_gradients(
    model: &NetworkModel,
    image: &[f64],
    label: usize,
    opts: &GradOptions,
    grads: &mut Gradients,
) -> SampleResult {
    let (h, o, t_len) = (model.n_hidden, model.n_out, model.t_window);
    let lif = &model.lif;
    let (beta, thr, gain) = (lif.beta, lif.u_threshold, lif.input_gain());
    let tape = record(model, image, opts);
    let (loss, loss_grad, counts) = losses(model, &tape, label, opts.loss);

    let mut du2_next = vec![0.0; o];
    let mut du1_next = vec![0.0; h];
    let mut du2 = vec![0.0; o];
    let mut du1 = vec![0.0; h];
    let mut dcur = vec![0.0; o];
    let mut d_drive = vec![0.0; h];

    for t in (0..t_len).rev() {
        for k in 0..o {
            let (count_grad, direct) = match opts.loss {
                LossKind::SpikeCount => (loss_grad[k], 0.0),
                LossKind::Membrane => (0.0, loss_grad[t * o + k]),
            };
            let reset = if opts.detach_reset { 0.0 } else { -thr * du2_next[k] };
            let ds = count_grad + reset;
            du2[k] = direct + surrogate_spike_grad(tape.u2[t * o + k], thr, opts.slope) * ds
                + beta * du2_next[k];
            dcur[k] = gain * du2[k];
        }
        for hh in 0..h {
            let s = tape.s1[t * h + hh];
            let row = &model.w_out[hh * o..(hh + 1) * o];
            let grow = &mut grads.w_out[hh * o..(hh + 1) * o];
            let mut ds = 0.0;
            for k in 0..o {
                grow[k] += s * dcur[k];
                ds += row[k] * dcur[k];
            }
            if !opts.detach_reset {
                ds -= thr * du1_next[hh];
            }
            du1[hh] = surrogate_spike_grad(tape.u1[t * h + hh], thr, opts.slope) * ds
                + beta * du1_next[hh];
            d_drive[hh] += gain * du1[hh];
        }
        if !grads.b_out.is_empty() {
            grads.b_out.iter_mut().zip(&dcur).for_each(|(b, d)| *b += d);
        }
        std::mem::swap(&mut du2, &mut du2_next);
        std::mem::swap(&mut du1, &mut du1_next);
    }

    let d_pre: Vec<f64> = d_drive
        .iter()
        .zip(&tape.pre)
        .map(|(d, &x)| d * model.filter.derivative(x))
        .collect();
    for (j, &x) in image.iter().enumerate() {
        if x != 0.0 {
            let row = &mut grads.w_in[j * h..(j + 1) * h];
            row.iter_mut().zip(&d_pre).for_each(|(g, d)| *g += x * d);
        }
    }
    if !grads.b_hidden.is_empty() {
        grads.b_hidden.iter_mut().zip(&d_pre).for_each(|(b, d)| *b += d);
    }
    SampleResult { loss, counts }
}

/// Gradient of one sample's loss.
pub fn sample_gradients(
    model: &NetworkModel,
    image: &[f64],
    label: usize,
    opts: &GradOptions,
) -> (SampleResult, Gradients) {
    let mut grads = Gradients::zeros(model);
    let result = accumulate_gradients(model, image, label, opts, &mut grads);
    (result, grads)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub surrogate_slope: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            epochs: 50,
            batch_size: 128,
            surrogate_slope: 2.0,
            loss: LossKind::Membrane,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.surrogate_slope > 0.0 && self.surrogate_slope.is_finite()) {
            return Err(Error::Config("surrogate slope must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogSplit {
    Train,
    Test,
}

impl LogSplit {
    pub fn name(self) -> &'static str {
        match self {
            LogSplit::Train => "train",
            LogSplit::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub split: LogSplit,
    pub loss: f64,
    pub accuracy: f64,
}

// Fixed-size work units keep the summation order independent of thread count.
const CHUNK: usize = 16;

fn params_mut(model: &mut NetworkModel) -> Vec<&mut [f64]> {
    let mut out: Vec<&mut [f64]> = vec![&mut model.w_in, &mut model.w_out];
    if let (Some(bh), Some(bo)) = (model.b_hidden.as_mut(), model.b_out.as_mut()) {
        out.push(bh);
        out.push(bo);
    }
    out
}

/// Noise-free loss (of kind `loss`) and accuracy of `model` on `data`.
pub fn evaluate_clean(model: &NetworkModel, data: &Dataset, loss: LossKind) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation dataset"));
    }
    let opts = GradOptions::training(1.0, loss);
    let (loss, correct) = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let label = data.label(i);
            let tape = record(model, &data.image(i), &opts);
            let (l, _, counts) = losses(model, &tape, label, loss);
            let counts: Vec<usize> = counts.iter().map(|&c| c as usize).collect();
            (l, usize::from(argmax_counts(&counts) == label))
        })
        .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Train `model` in place. `on_epoch` sees every log row as it is produced.
pub fn train(
    model: &mut NetworkModel,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    config.validate()?;
    model.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let opts = GradOptions::training(config.surrogate_slope, config.loss);
    let shapes: Vec<usize> = params_mut(model).iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(AdamConfig::new(config.learning_rate), &shapes);
    let mut log = Vec::new();

    for epoch in 0..config.epochs {
        let shuffle_seed = config.seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (b, batch) in batches(train_set.len(), config.batch_size, shuffle_seed)?
            .iter()
            .enumerate()
        {
            let frozen = &*model;
            let partials: Vec<(Gradients, f64, usize)> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut grads = Gradients::zeros(frozen);
                    let mut loss = 0.0;
                    let mut hits = 0;
                    for &i in chunk {
                        let label = train_set.label(i);
                        let r = accumulate_gradients(frozen, &train_set.image(i), label, &opts, &mut grads);
                        loss += r.loss;
                        let counts: Vec<usize> = r.counts.iter().map(|&c| c as usize).collect();
                        hits += usize::from(argmax_counts(&counts) == label);
                    }
                    (grads, loss, hits)
                })
                .collect();
            let mut grads = Gradients::zeros(frozen);
            let mut batch_loss = 0.0;
            for (g, l, h) in &partials {
                grads.add(g);
                batch_loss += l;
                correct += h;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss {batch_loss} in epoch {epoch}, batch {b}"
                )));
            }
            loss_sum += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            let grad_refs: Vec<&[f64]> = if model.has_biases() {
                vec![&grads.w_in, &grads.w_out, &grads.b_hidden, &grads.b_out]
            } else {
                vec![&grads.w_in, &grads.w_out]
            };
            adam.update(&mut params_mut(model), &grad_refs)?;
        }
        let n = train_set.len() as f64;
        let row = EpochLog {
            epoch: epoch + 1,
            split: LogSplit::Train,
            loss: loss_sum / n,
            accuracy: correct as f64 / n,
        };
        on_epoch(&row);
        log.push(row);
        if let Some(test) = test_set {
            let (loss, accuracy) = evaluate_clean(model, test, config.loss)?;
            let row = EpochLog {
                epoch: epoch + 1,
                split: LogSplit::Test,
                loss,
                accuracy,
            };
            on_epoch(&row);
            log.push(row);
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lif::LifParams;
    use crate::net::{forward_counts, Filter};

    #[test]
    fn surrogate_shape() {
        let (thr, slope) = (1.0, 2.0);
        assert_eq!(surrogate_spike_grad(thr, thr, slope), slope);
        for x in [0.01, 0.3, 1.7, 12.0] {
            let (hi, lo) = (
                surrogate_spike_grad(thr + x, thr, slope),
                surrogate_spike_grad(thr - x, thr, slope),
            );
            assert!((hi - lo).abs() <= 1e-14 * hi);
            assert!(surrogate_spike_grad(thr + x, thr, slope) < slope);
        }
    }

    #[test]
    fn surrogate_has_nearly_unit_mass() {
        // Composite Simpson on [thr - 50, thr + 50].
        let (thr, slope) = (1.0, 2.0);
        let (a, b, n) = (thr - 50.0, thr + 50.0, 200_000);
        let h = (b - a) / n as f64;
        let mut acc = surrogate_spike_grad(a, thr, slope) + surrogate_spike_grad(b, thr, slope);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * surrogate_spike_grad(a + i as f64 * h, thr, slope);
        }
        let mass = acc * h / 3.0;
        assert!((mass - 1.0).abs() < 0.02, "mass {mass}");
    }

    #[test]
    fn smooth_spike_derivative_is_surrogate() {
        for u in [-1.0, 0.5, 0.99, 1.0, 1.2, 3.0] {
            let h = 1e-6;
            let fd = (smooth_spike(u + h, 1.0, 2.0) - smooth_spike(u - h, 1.0, 2.0)) / (2.0 * h);
            assert!((fd - surrogate_spike_grad(u, 1.0, 2.0)).abs() < 1e-7);
        }
    }

    #[test]
    fn cross_entropy_gradient_sums_to_zero() {
        let (l, g) = cross_entropy(&[1.0, 2.0, 0.5], 1);
        assert!(l > 0.0);
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
        assert!(g[1] < 0.0);
    }

    fn tiny(biases: bool, filter: Filter) -> (NetworkModel, Vec<f64>) {
        let mut m = NetworkModel::init(4, 3, 2, filter, LifParams::default(), 5, biases, 17).unwrap();
        m.w_in.iter_mut().for_each(|w| *w *= 3.0);
        m.w_out.iter_mut().for_each(|w| *w *= 3.0);
        (m, vec![0.9, 0.2, 0.6, 1.0])
    }

    fn max_rel_error(model: &NetworkModel, x: &[f64], opts: &GradOptions) -> f64 {
        let (_, g) = sample_gradients(model, x, 1, opts);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let groups: [(&Vec<f64>, fn(&mut NetworkModel) -> &mut Vec<f64>); 2] =
            [(&g.w_in, |m| &mut m.w_in), (&g.w_out, |m| &mut m.w_out)];
        for (analytic, field) in groups {
            for i in 0..analytic.len() {
                let mut plus = model.clone();
                field(&mut plus)[i] += h;
                let mut minus = model.clone();
                field(&mut minus)[i] -= h;
                let fd = (sample_loss(&plus, x, 1, opts) - sample_loss(&minus, x, 1, opts)) / (2.0 * h);
                let denom = analytic[i].abs().max(fd.abs()).max(1e-12);
                worst = worst.max((analytic[i] - fd).abs() / denom);
            }
        }
        worst
    }

    #[test]
    fn smooth_twin_gradients_all_filters_and_losses() {
        for filter in Filter::ALL {
            for loss in [LossKind::SpikeCount, LossKind::Membrane] {
                let (m, x) = tiny(false, filter);
                let err = max_rel_error(&m, &x, &GradOptions::smooth_twin(2.0, loss));
                assert!(err <= 1e-4, "{filter} {loss}: {err}");
            }
        }
    }

    #[test]
    fn smooth_twin_bias_gradients() {
        let (m, x) = tiny(true, Filter::Sigmoid);
        let opts = GradOptions::smooth_twin(2.0, LossKind::SpikeCount);
        let (_, g) = sample_gradients(&m, &x, 0, &opts);
        let h = 1e-5;
        for (which, analytic) in [(0, &g.b_hidden), (1, &g.b_out)] {
            for i in 0..analytic.len() {
                let bump = |d: f64| {
                    let mut mm = m.clone();
                    let b = if which == 0 { mm.b_hidden.as_mut() } else { mm.b_out.as_mut() };
                    b.unwrap()[i] += d;
                    sample_loss(&mm, &x, 0, &opts)
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                assert!((fd - analytic[i]).abs() / fd.abs().max(1e-12) <= 1e-4);
            }
        }
    }

    #[test]
    fn heaviside_forward_matches_network_counts() {
        let (m, x) = tiny(false, Filter::None);
        let opts = GradOptions::training(2.0, LossKind::SpikeCount);
        let (r, _) = sample_gradients(&m, &x, 0, &opts);
        let counts: Vec<f64> = forward_counts(&m, &x, None, 0).iter().map(|&c| c as f64).collect();
        assert_eq!(r.counts, counts);
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
