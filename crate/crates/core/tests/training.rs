use std::path::PathBuf;

use snn_lab_core::mnist::{load_split, ImageMatrix, Split, PIXELS, TRAIN_IMAGES};
use snn_lab_core::train::{surrogate_spike_grad, EpochLog, LogSplit};
use snn_lab_core::{train, Dataset, Filter, NetworkModel, TrainConfig};

#[test]
fn surrogate_has_unit_mass() {
    // Composite Simpson on [thr - 50, thr + 50].
    let (a, b, n) = (-49.0f64, 51.0f64, 200_000usize);
    let h = (b - a) / n as f64;
    let mut s = surrogate_spike_grad(a, 1.0, 2.0) + surrogate_spike_grad(b, 1.0, 2.0);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * surrogate_spike_grad(a + k as f64 * h, 1.0, 2.0);
    }
    let mass = s * h / 3.0;
    assert!((mass - 1.0).abs() < 0.02, "{mass}");
    assert_eq!(surrogate_spike_grad(1.0, 1.0, 2.0), 2.0);
}

fn striped(n: usize) -> Dataset {
    // Eight hand-made images: label k lights up rows 3k..3k+3.
    let mut bytes = vec![0u8; n * PIXELS];
    let labels: Vec<u8> = (0..n).map(|i| (i % 8) as u8).collect();
    for i in 0..n {
        let k = labels[i] as usize;
        for r in 3 * k..3 * k + 3 {
            for c in 4..24 {
                bytes[i * PIXELS + r * 28 + c] = 255;
            }
        }
        bytes[i * PIXELS + 27 * 28 + i % 28] = 128;
    }
    Dataset::new(ImageMatrix { n, bytes }, labels).unwrap()
}

#[test]
fn overfits_eight_images() {
    let data = striped(8);
    let mut m = NetworkModel::mnist(Filter::None, 3).unwrap();
    m.t_window = 25;
    let config = TrainConfig {
        epochs: 200,
        batch_size: 8,
        learning_rate: 5e-3,
        seed: 3,
        ..TrainConfig::default()
    };
    let log = train(&mut m, &data, None, &config, |_| {}).unwrap();
    assert_eq!(log.last().unwrap().accuracy, 1.0, "{:?}", log.last());
}

#[test]
fn zero_epochs_leave_the_model_untouched() {
    let data = striped(8);
    let mut m = NetworkModel::mnist(Filter::Tanh, 1).unwrap();
    let before = m.clone();
    let log = train(&mut m, &data, None, &TrainConfig { epochs: 0, ..TrainConfig::default() }, |_| {}).unwrap();
    assert!(log.is_empty());
    assert_eq!(m, before);
}

#[test]
fn seeded_training_is_deterministic() {
    let data = striped(40);
    let run = || {
        let mut m = NetworkModel::mnist(Filter::Sigmoid, 5).unwrap();
        m.t_window = 20;
        let cfg = TrainConfig { epochs: 3, batch_size: 16, seed: 5, ..TrainConfig::default() };
        let log = train(&mut m, &data, Some(&data), &cfg, |_| {}).unwrap();
        (m, log)
    };
    let (m1, l1) = run();
    let (m2, l2) = run();
    assert_eq!(l1, l2);
    assert_eq!(m1, m2);
    assert_eq!(l1.iter().filter(|r| r.split == LogSplit::Test).count(), 3);
}

#[test]
fn empty_dataset_is_rejected() {
    let empty = Dataset::new(ImageMatrix { n: 0, bytes: vec![] }, vec![]).unwrap();
    let mut m = NetworkModel::mnist(Filter::None, 0).unwrap();
    assert!(train(&mut m, &empty, None, &TrainConfig::default(), |_| {}).is_err());
}

fn data_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("SNN_LAB_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    dir.join(TRAIN_IMAGES).exists().then_some(dir)
}

#[test]
fn loss_falls_over_first_three_epochs() {
    let Some(dir) = data_dir() else {
        eprintln!("skipping: MNIST not available");
        return;
    };
    let train_set = load_split(&dir, Split::Train).unwrap();
    let mut first = 0.0;
    let mut third = 0.0;
    for seed in 0..3 {
        let mut m = NetworkModel::mnist(Filter::Sigmoid, seed).unwrap();
        m.t_window = 10;
        let cfg = TrainConfig { epochs: 3, seed, ..TrainConfig::default() };
        let log: Vec<EpochLog> = train(&mut m, &train_set, None, &cfg, |_| {}).unwrap();
        first += log[0].loss;
        third += log[2].loss;
    }
    assert!(third < first, "mean loss went from {} to {}", first / 3.0, third / 3.0);
}
