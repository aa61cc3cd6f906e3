//! First-order discrete-time leaky integrate-and-fire neuron.
//!
//! ```text
//! U[t+1] = beta * U[t] + I[t+1] - S[t] * U_thr
//! S[t+1] = 1 if U[t+1] > U_thr else 0
//! ```
//!
//! The reset uses the spike emitted on the previous step, so a neuron that
//! fires at step `t` has its potential lowered by exactly `U_thr` at `t + 1`.
//! There is no lower clamp: a persistently negative drive pushes the membrane
//! arbitrarily far below zero and the neuron goes silent.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams {
    /// Membrane decay per step, `0 <= beta < 1`.
    pub beta: f64,
    pub u_threshold: f64,
    /// Scale the input current by `(1 - beta)` before integration.
    pub input_scaling: bool,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            beta: 0.9,
            u_threshold: 1.0,
            input_scaling: false,
        }
    }
}

impl LifParams {
    pub fn new(beta: f64, u_threshold: f64) -> Result<Self> {
        let params = Self {
            beta,
            u_threshold,
            input_scaling: false,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_input_scaling(mut self, on: bool) -> Self {
        self.input_scaling = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in [0, 1), got {}",
                self.beta
            )));
        }
        if !(self.u_threshold > 0.0 && self.u_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "u_threshold must be positive and finite, got {}",
                self.u_threshold
            )));
        }
        Ok(())
    }

    /// Factor applied to the input current during integration.
    #[inline]
    pub fn input_gain(&self) -> f64 {
        if self.input_scaling {
            1.0 - self.beta
        } else {
            1.0
        }
    }

    /// Leak, integrate and reset; no threshold comparison.
    #[inline]
    pub fn integrate(&self, u_mem: f64, last_spike: bool, i_in: f64) -> f64 {
        let reset = if last_spike { self.u_threshold } else { 0.0 };
        self.beta * u_mem + self.input_gain() * i_in - reset
    }

    #[inline]
    pub fn fires(&self, u_mem: f64) -> bool {
        u_mem > self.u_threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NeuronState {
    pub u_mem: f64,
    pub last_spike: bool,
}

impl NeuronState {
    pub fn new(u_mem: f64) -> Self {
        Self {
            u_mem,
            last_spike: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub i_in: f64,
    /// Membrane potential after this step's update.
    pub u_mem: f64,
    pub spike: bool,
}

/// Advance one neuron by a single step.
pub fn lif_step(
    state: NeuronState,
    i_in: f64,
    params: &LifParams,
) -> Result<(NeuronState, StepRecord)> {
    if !i_in.is_finite() {
        return Err(Error::NumericDomain(format!("input current {i_in}")));
    }
    if !state.u_mem.is_finite() {
        return Err(Error::NumericDomain(format!(
            "membrane potential {}",
            state.u_mem
        )));
    }
    let u_mem = params.integrate(state.u_mem, state.last_spike, i_in);
    let spike = params.fires(u_mem);
    Ok((
        NeuronState {
            u_mem,
            last_spike: spike,
        },
        StepRecord { i_in, u_mem, spike },
    ))
}

/// Drive one neuron with a whole input sequence.
pub fn lif_run(
    inputs: &[f64],
    params: &LifParams,
    initial: NeuronState,
) -> Result<Vec<StepRecord>> {
    params.validate()?;
    let mut state = initial;
    inputs
        .iter()
        .map(|&i_in| {
            let (next, record) = lif_step(state, i_in, params)?;
            state = next;
            Ok(record)
        })
        .collect()
}

pub fn spike_train(records: &[StepRecord]) -> Vec<bool> {
    records.iter().map(|r| r.spike).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> LifParams {
        LifParams::default()
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let (s, r) = lif_step(NeuronState::default(), 0.0, &p()).unwrap();
        assert_eq!(s.u_mem, 0.0);
        assert!(!r.spike);
    }

    #[test]
    fn single_supra_threshold_input_fires() {
        let (s, r) = lif_step(NeuronState::default(), 1.2, &p()).unwrap();
        assert_eq!(s.u_mem, 1.2);
        assert!(r.spike && s.last_spike);
    }

    #[test]
    fn threshold_is_strict() {
        let (_, r) = lif_step(NeuronState::default(), 1.0, &p()).unwrap();
        assert!(!r.spike);
    }

    #[test]
    fn reset_lands_on_following_step() {
        let params = p();
        let (s1, _) = lif_step(NeuronState::default(), 1.2, &params).unwrap();
        let (s2, _) = lif_step(s1, 0.0, &params).unwrap();
        assert!((s2.u_mem - (0.9 * 1.2 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_values_rejected() {
        assert!(matches!(
            lif_step(NeuronState::default(), f64::NAN, &p()),
            Err(Error::NumericDomain(_))
        ));
        assert!(matches!(
            lif_step(NeuronState::new(f64::INFINITY), 0.0, &p()),
            Err(Error::NumericDomain(_))
        ));
    }

    #[test]
    fn invalid_params() {
        assert!(LifParams::new(1.0, 1.0).is_err());
        assert!(LifParams::new(-0.1, 1.0).is_err());
        assert!(LifParams::new(0.5, 0.0).is_err());
        assert!(LifParams::new(0.0, 2.0).is_ok());
    }

    #[test]
    fn empty_run_is_empty() {
        assert!(lif_run(&[], &p(), NeuronState::default()).unwrap().is_empty());
    }

    #[test]
    fn zero_drive_never_fires() {
        let recs = lif_run(&[0.0; 500], &p(), NeuronState::default()).unwrap();
        assert!(recs.iter().all(|r| !r.spike && r.u_mem == 0.0));
    }

    #[test]
    fn input_scaling_variant() {
        let params = p().with_input_scaling(true);
        let (s, _) = lif_step(NeuronState::default(), 1.0, &params).unwrap();
        assert!((s.u_mem - 0.1).abs() < 1e-15);
    }

    #[test]
    fn negative_drive_drifts_without_bound() {
        let recs = lif_run(&[-1.0; 300], &p(), NeuronState::default()).unwrap();
        // Fixed point of u = 0.9u - 1 is -10.
        assert!((recs.last().unwrap().u_mem + 10.0).abs() < 1e-9);
        assert!(recs.iter().all(|r| !r.spike));
    }

    proptest! {
        #[test]
        fn linear_leak(u0 in -5.0f64..1.0, steps in 1usize..150) {
            let params = p();
            let recs = lif_run(&vec![0.0; steps], &params, NeuronState::new(u0)).unwrap();
            for (t, r) in recs.iter().enumerate() {
                let expected = params.beta.powi(t as i32 + 1) * u0;
                let scale = expected.abs().max(f64::MIN_POSITIVE);
                prop_assert!((r.u_mem - expected).abs() / scale <= 1e-12);
            }
        }

        #[test]
        fn reset_conservation(inputs in prop::collection::vec(-2.0f64..3.0, 1..200)) {
            let params = p();
            let recs = lif_run(&inputs, &params, NeuronState::default()).unwrap();
            for t in 0..recs.len() - 1 {
                let no_reset = params.beta * recs[t].u_mem + inputs[t + 1];
                let expected = if recs[t].spike { -params.u_threshold } else { 0.0 };
                prop_assert!((recs[t + 1].u_mem - no_reset - expected).abs() < 1e-12);
                prop_assert_eq!(recs[t].spike, recs[t].u_mem > params.u_threshold);
            }
        }

        #[test]
        fn deterministic(inputs in prop::collection::vec(-2.0f64..3.0, 0..100)) {
            let a = lif_run(&inputs, &p(), NeuronState::default()).unwrap();
            let b = lif_run(&inputs, &p(), NeuronState::default()).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.u_mem.to_bits(), y.u_mem.to_bits());
                prop_assert_eq!(x.spike, y.spike);
            }
        }
    }
}
