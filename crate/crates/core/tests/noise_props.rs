use proptest::prelude::*;
use snn_lab_core::noise::noisy_lif_run;
use snn_lab_core::{
    inject, lif_run, sample_noise, LifParams, NeuronState, NoiseConfig, NoiseKind, NoiseStage, Sharing,
};

fn config(kind: NoiseKind, stage: NoiseStage, sharing: Sharing, d: f64, seed: u64) -> NoiseConfig {
    NoiseConfig::with_intensity(kind, stage, sharing, d, seed).unwrap()
}

#[test]
fn additive_term_variance_is_two_d() {
    for d in [0.01, 0.5] {
        let c = config(NoiseKind::Additive, NoiseStage::InputCurrent, Sharing::Uncommon, d, 3);
        let zeros = vec![0.0; 1000];
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut n = 0.0;
        for t in 0..100 {
            let (xa, xm) = sample_noise(&c, 0, t, 1000);
            for v in inject(&zeros, &xa, &xm, d, 0.0).unwrap() {
                sum += v;
                sq += v * v;
                n += 1.0;
            }
        }
        let mean = sum / n;
        let var = sq / n - mean * mean;
        assert!(mean.abs() <= 0.02, "mean {mean}");
        assert!((var / (2.0 * d) - 1.0).abs() <= 0.03, "var {var} for d {d}");
    }
}

#[test]
fn multiplicative_term_on_unit_signal_has_variance_two_d() {
    let d = 0.3;
    let c = config(NoiseKind::Multiplicative, NoiseStage::InputCurrent, Sharing::Uncommon, d, 8);
    let ones = vec![1.0; 1000];
    let mut values = Vec::new();
    for t in 0..100 {
        let (xa, xm) = sample_noise(&c, 1, t, 1000);
        values.extend(inject(&ones, &xa, &xm, 0.0, d).unwrap().into_iter().map(|v| v - 1.0));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!((var / (2.0 * d) - 1.0).abs() <= 0.03);
}

#[test]
fn noise_is_white_in_time() {
    let c = config(NoiseKind::Additive, NoiseStage::InputCurrent, Sharing::Common, 1.0, 21);
    let xs: Vec<f64> = (0..100_000).map(|t| sample_noise(&c, 4, t, 1).0[0]).collect();
    let lag1 = xs.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (xs.len() - 1) as f64;
    assert!(lag1.abs() < 0.015, "lag-1 autocorrelation {lag1}");
}

#[test]
fn streams_differ_across_trials_and_seeds() {
    let c = config(NoiseKind::Additive, NoiseStage::InputCurrent, Sharing::Uncommon, 1.0, 1);
    let other = NoiseConfig { seed: 2, ..c };
    assert_ne!(sample_noise(&c, 0, 0, 4), sample_noise(&c, 1, 0, 4));
    assert_ne!(sample_noise(&c, 0, 0, 4), sample_noise(&other, 0, 0, 4));
}

proptest! {
    #[test]
    fn zero_intensity_reproduces_clean_run(
        inputs in prop::collection::vec(-1.0f64..2.0, 1..120),
        seed in any::<u64>(),
        trial in any::<u64>(),
        stage in prop::sample::select(NoiseStage::ALL.to_vec()),
        kind in prop::sample::select(vec![NoiseKind::Additive, NoiseKind::Multiplicative, NoiseKind::Both]),
        sharing in prop::sample::select(Sharing::ALL.to_vec()),
    ) {
        let params = LifParams::default();
        let clean = lif_run(&inputs, &params, NeuronState::default()).unwrap();
        let c = config(kind, stage, sharing, 0.0, seed);
        let (noisy, emitted) = noisy_lif_run(&inputs, &params, &c, trial).unwrap();
        prop_assert_eq!(&noisy, &clean);
        for (e, r) in emitted.iter().zip(&clean) {
            prop_assert_eq!(e.to_bits(), if r.spike { 1.0f64 } else { 0.0 }.to_bits());
        }
    }

    #[test]
    fn common_noise_is_shared(n in 1usize..64, t in 0usize..1000, trial in any::<u64>()) {
        let c = config(NoiseKind::Both, NoiseStage::MembranePotential, Sharing::Common, 1.0, 77);
        let (xa, xm) = sample_noise(&c, trial, t, n);
        prop_assert!(xa.iter().all(|&v| v == xa[0]));
        prop_assert!(xm.iter().all(|&v| v == xm[0]));
    }

    #[test]
    fn spike_noise_never_changes_the_raster(
        inputs in prop::collection::vec(-0.5f64..1.5, 1..150),
        d in 0.0f64..2.0,
        trial in any::<u64>(),
    ) {
        let params = LifParams::default();
        let clean = lif_run(&inputs, &params, NeuronState::default()).unwrap();
        let c = config(NoiseKind::Both, NoiseStage::SpikeOutput, Sharing::Uncommon, d, 5);
        let (noisy, _) = noisy_lif_run(&inputs, &params, &c, trial).unwrap();
        prop_assert_eq!(noisy, clean);
    }
}
