use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use snn_lab_core::mnist::{load_split, Split, TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use snn_lab_core::net::{evaluate, NetworkModel, DEFAULT_WINDOW, HIDDEN};
use snn_lab_core::signal::{log_grid, SingleNeuronSweep};
use snn_lab_core::train::{train, TrainConfig};
use snn_lab_core::{
    single_neuron_sweep, Dataset, Filter, InputSignal, LifParams, NoiseConfig, NoiseKind, NoiseStage, Sharing,
};

use crate::checkpoint::{load_model, save_model};
use crate::cli::{Cli, Command, EvalArgs, FetchArgs, GridArgs, InputArg, NoiseSweepArgs, SingleNeuronArgs, TrainArgs};
use crate::config::Config;
use crate::error::CliError;
use crate::results::{read_sweep, write_sweep, write_train_log, Metric, SweepResultRow};
use crate::svg::{self, Panel, Series};

pub const DEFAULT_DMIN: f64 = 1e-5;
pub const DEFAULT_DMAX: f64 = 1.0;
pub const DEFAULT_POINTS: usize = 20;
pub const DEFAULT_NETWORK_REPS: usize = 10;
pub const DEFAULT_SUBSET: usize = 1000;
pub const DEFAULT_BASE_URL: &str = "https://storage.googleapis.com/cvdf-datasets/mnist";

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::SingleNeuron(a) => cmd_single_neuron(&a, &config),
        Command::Train(a) => cmd_train(&a, &config),
        Command::NoiseSweep(a) => cmd_noise_sweep(&a, &config),
        Command::Eval(a) => cmd_eval(&a, &config),
        Command::Fetch(a) => cmd_fetch(&a, &config),
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn resolve_grid(grid: &GridArgs, config: &Config) -> Result<Vec<f64>, CliError> {
    let explicit = match &grid.grid {
        Some(g) => Some(g.clone()),
        None => config
            .get::<String>("grid")?
            .map(|s| {
                s.split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| usage(format!("grid value '{v}': {e}"))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?,
    };
    if let Some(g) = explicit {
        if g.is_empty() {
            return Err(usage("--grid needs at least one intensity"));
        }
        if g.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(usage("grid intensities must be finite and non-negative"));
        }
        if g.windows(2).any(|w| w[0] > w[1]) {
            return Err(usage("grid intensities must be sorted ascending"));
        }
        return Ok(g);
    }
    let dmin = config.resolve(grid.dmin, "dmin", DEFAULT_DMIN)?;
    let dmax = config.resolve(grid.dmax, "dmax", DEFAULT_DMAX)?;
    let points = config.resolve(grid.points, "points", DEFAULT_POINTS)?;
    log_grid(dmin, dmax, points).map_err(usage)
}

fn positive(name: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        Err(usage(format!("--{name} must be at least 1")))
    } else {
        Ok(v)
    }
}

fn svg_path(csv: &Path) -> PathBuf {
    csv.with_extension("svg")
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("create {}", dir.display()), e))?;
    }
    let f = fs::File::create(path).map_err(|e| CliError::io(format!("create {}", path.display()), e))?;
    Ok(BufWriter::new(f))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(format!("write {}", path.display()), e))
}

fn write_rows(path: &Path, rows: &[SweepResultRow]) -> Result<(), CliError> {
    let w = create(path)?;
    write_sweep(w, rows)?;
    Ok(())
}

/// Colour of a stage/kind curve in the single-neuron figures.
fn single_color(stage: &str, kind: &str) -> &'static str {
    match (stage, kind) {
        ("input", "additive") => "#17becf",
        ("membrane", "additive") => "#1f3fbf",
        ("input", "multiplicative") => "#8e44ad",
        ("membrane", "multiplicative") => "#ff8c00",
        ("spike", "additive") => "#2ca02c",
        ("spike", "multiplicative") => "#2ca02c",
        _ => "#555555",
    }
}

/// Colour of a noise stage in the network figures.
fn network_color(stage: &str) -> &'static str {
    match stage {
        "input" => "#8e44ad",
        "membrane" => "#17becf",
        "spike" => "#ff8c00",
        _ => "#555555",
    }
}

/// Mean of `metric` per (stage, kind) curve and intensity, in first-seen curve order.
fn curves(rows: &[SweepResultRow], metric: Metric) -> Vec<((String, String), Vec<(f64, f64)>)> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut acc: BTreeMap<(String, String), BTreeMap<u64, (f64, f64, usize)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let key = (r.stage.clone(), r.kind.clone());
        if !order.contains(&key) {
            order.push(key.clone());
        }
        let e = acc
            .entry(key)
            .or_default()
            .entry(r.d.to_bits())
            .or_insert((r.d, 0.0, 0));
        e.1 += r.value;
        e.2 += 1;
    }
    order
        .into_iter()
        .map(|key| {
            let mut pts: Vec<(f64, f64)> = acc[&key].values().map(|&(d, s, n)| (d, s / n as f64)).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (key, pts)
        })
        .collect()
}

/// Four-panel TP/FP/TN/FN figure from single-neuron sweep rows.
pub fn single_neuron_figure(rows: &[SweepResultRow]) -> String {
    let panels: Vec<Panel> = Metric::CONFUSION
        .iter()
        .map(|&m| Panel {
            title: m.name().to_uppercase(),
            y_label: "events".into(),
            series: curves(rows, m)
                .into_iter()
                .map(|((stage, kind), points)| Series {
                    color: single_color(&stage, &kind),
                    dashed: kind == "multiplicative",
                    label: format!("{stage} {kind}"),
                    points,
                })
                .collect(),
        })
        .collect();
    svg::render(&panels, 2, "noise intensity D")
}

/// Accuracy-vs-intensity figure from noise-sweep rows.
pub fn noise_sweep_figure(rows: &[SweepResultRow]) -> String {
    let title = rows
        .first()
        .map(|r| format!("{} noise, {} filter", r.sharing, r.filter))
        .unwrap_or_default();
    let series = curves(rows, Metric::Accuracy)
        .into_iter()
        .map(|((stage, kind), points)| Series {
            color: network_color(&stage),
            dashed: kind == "multiplicative",
            label: format!("{stage} {kind}"),
            points,
        })
        .collect();
    svg::render(
        &[Panel {
            title,
            y_label: "accuracy".into(),
            series,
        }],
        1,
        "noise intensity D",
    )
}

/// Rows of a single-neuron sweep for every requested stage/kind pair.
pub fn single_neuron_rows(
    input: InputArg,
    signal: InputSignal,
    combos: &[(NoiseStage, NoiseKind)],
    d_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<SweepResultRow>, CliError> {
    let mut rows = Vec::new();
    for &(stage, kind) in combos {
        let points = single_neuron_sweep(&SingleNeuronSweep {
            signal,
            params: LifParams::default(),
            stage,
            kind,
            d_grid: d_grid.to_vec(),
            reps,
            seed,
        })?;
        for p in &points {
            for (rep, c) in p.trials.iter().enumerate() {
                for (metric, value) in Metric::CONFUSION.iter().zip(c.as_array()) {
                    rows.push(SweepResultRow {
                        experiment_id: format!("single-{}", input.name()),
                        filter: "na".into(),
                        stage: stage.name().into(),
                        kind: kind.name().into(),
                        sharing: "na".into(),
                        d: p.d,
                        rep,
                        metric: *metric,
                        value: value as f64,
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn cmd_single_neuron(a: &SingleNeuronArgs, config: &Config) -> Result<(), CliError> {
    let input = match a.input {
        Some(i) => i,
        None => match config.get::<String>("input")?.as_deref() {
            None | Some("positive") => InputArg::Positive,
            Some("posneg") => InputArg::Posneg,
            Some(other) => return Err(usage(format!("unknown input '{other}'"))),
        },
    };
    let stage = match a.stage {
        Some(s) => Some(s),
        None => config.get::<NoiseStage>("stage")?,
    };
    let kind = match a.kind {
        Some(k) => Some(k),
        None => config.get::<NoiseKind>("kind")?,
    };
    let stages = stage.map_or(vec![NoiseStage::InputCurrent, NoiseStage::MembranePotential], |s| vec![s]);
    let kinds = kind.map_or(NoiseKind::SINGLE.to_vec(), |k| vec![k]);
    let combos: Vec<(NoiseStage, NoiseKind)> = stages
        .iter()
        .flat_map(|&s| kinds.iter().map(move |&k| (s, k)))
        .collect();

    let d_grid = resolve_grid(&a.grid, config)?;
    let reps = positive("reps", config.resolve(a.reps, "reps", SingleNeuronSweep::DEFAULT_REPS)?)?;
    let seed = config.resolve(a.seed, "seed", 0u64)?;
    let mut signal = InputSignal::new(input.waveform());
    signal.n_steps = positive("steps", config.resolve(a.steps, "steps", signal.n_steps)?)?;
    signal.dt = config.resolve(a.dt, "dt", signal.dt)?;
    signal.validate().map_err(usage)?;
    let out = config.resolve(a.out.clone(), "out", PathBuf::from("single_neuron.csv"))?;

    let rows = single_neuron_rows(input, signal, &combos, &d_grid, reps, seed)?;
    write_rows(&out, &rows)?;
    write_text(&svg_path(&out), &single_neuron_figure(&rows))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn load_data(dir: &Path, split: Split, subset: Option<usize>) -> Result<Dataset, CliError> {
    let data = load_split(dir, split)?;
    Ok(match subset {
        Some(n) if n > 0 && n < data.len() => data.head(n),
        _ => data,
    })
}

fn cmd_train(a: &TrainArgs, config: &Config) -> Result<(), CliError> {
    let defaults = TrainConfig::default();
    let filter = config.resolve(a.filter, "filter", Filter::None)?;
    let timesteps = positive("timesteps", config.resolve(a.timesteps, "timesteps", DEFAULT_WINDOW)?)?;
    let biases = a.biases || config.resolve(None, "biases", false)?;
    let train_config = TrainConfig {
        learning_rate: config.resolve(a.lr, "lr", defaults.learning_rate)?,
        epochs: config.resolve(a.epochs, "epochs", defaults.epochs)?,
        batch_size: config.resolve(a.batch_size, "batch-size", defaults.batch_size)?,
        surrogate_slope: config.resolve(None, "surrogate-slope", defaults.surrogate_slope)?,
        loss: config.resolve(a.loss, "loss", defaults.loss)?,
        seed: config.resolve(a.seed, "seed", defaults.seed)?,
    };
    train_config.validate().map_err(usage)?;
    let model_out = config.resolve(a.model_out.clone(), "model-out", PathBuf::from("model.snn1"))?;
    let log_out = config.resolve(a.log_out.clone(), "log-out", PathBuf::from("train_log.csv"))?;
    let train_subset = a.train_subset.or(config.get("train-subset")?);
    let test_subset = a.test_subset.or(config.get("test-subset")?);

    let dir = config.data_dir(a.data_dir.clone())?;
    let train_set = load_data(&dir, Split::Train, train_subset)?;
    let test_set = load_data(&dir, Split::Test, test_subset)?;

    let mut model = NetworkModel::init(
        snn_lab_core::mnist::PIXELS,
        HIDDEN,
        snn_lab_core::mnist::CLASSES,
        filter,
        LifParams::default(),
        timesteps,
        biases,
        train_config.seed,
    )?;
    let log = train(&mut model, &train_set, Some(&test_set), &train_config, |row| {
        eprintln!(
            "epoch {:>3} {:<5} loss {:.4} accuracy {:.4}",
            row.epoch,
            row.split.name(),
            row.loss,
            row.accuracy
        );
    })?;
    save_model(&model, &model_out)?;
    write_train_log(create(&log_out)?, &log)?;
    eprintln!("model written to {}", model_out.display());
    Ok(())
}

const COMBOS: [(NoiseStage, NoiseKind); 6] = [
    (NoiseStage::InputCurrent, NoiseKind::Additive),
    (NoiseStage::InputCurrent, NoiseKind::Multiplicative),
    (NoiseStage::MembranePotential, NoiseKind::Additive),
    (NoiseStage::MembranePotential, NoiseKind::Multiplicative),
    (NoiseStage::SpikeOutput, NoiseKind::Additive),
    (NoiseStage::SpikeOutput, NoiseKind::Multiplicative),
];

/// Per-repetition accuracy rows for all six stage/kind pairs on `data`.
pub fn noise_sweep_rows(
    model: &NetworkModel,
    data: &Dataset,
    sharing: Sharing,
    d_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<SweepResultRow>, CliError> {
    let mut rows = Vec::new();
    for (stage, kind) in COMBOS {
        for &d in d_grid {
            let noise = NoiseConfig::with_intensity(kind, stage, sharing, d, seed)?;
            let stats = evaluate(model, data, Some(&noise), reps)?;
            for (rep, &acc) in stats.per_rep.iter().enumerate() {
                rows.push(SweepResultRow {
                    experiment_id: format!("noise-{}", sharing.name()),
                    filter: model.filter.name().into(),
                    stage: stage.name().into(),
                    kind: kind.name().into(),
                    sharing: sharing.name().into(),
                    d,
                    rep,
                    metric: Metric::Accuracy,
                    value: acc,
                });
            }
        }
    }
    Ok(rows)
}

fn subset(a: Option<usize>, config: &Config) -> Result<Option<usize>, CliError> {
    Ok(Some(config.resolve(a, "subset", DEFAULT_SUBSET)?))
}

fn cmd_noise_sweep(a: &NoiseSweepArgs, config: &Config) -> Result<(), CliError> {
    let sharing = config.resolve(a.sharing, "sharing", Sharing::Uncommon)?;
    let d_grid = resolve_grid(&a.grid, config)?;
    let reps = positive("reps", config.resolve(a.reps, "reps", DEFAULT_NETWORK_REPS)?)?;
    let seed = config.resolve(a.seed, "seed", 0u64)?;
    let out = config.resolve(a.out.clone(), "out", PathBuf::from("noise_sweep.csv"))?;
    let model = load_model(&a.model)?;
    let dir = config.data_dir(a.data_dir.clone())?;
    let data = load_data(&dir, Split::Test, subset(a.subset, config)?)?;

    let rows = noise_sweep_rows(&model, &data, sharing, &d_grid, reps, seed)?;
    write_rows(&out, &rows)?;
    write_text(&svg_path(&out), &noise_sweep_figure(&rows))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn cmd_eval(a: &EvalArgs, config: &Config) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let dir = config.data_dir(a.data_dir.clone())?;
    let data = load_data(&dir, Split::Test, Some(config.resolve(a.subset, "subset", 0)?))?;
    let d = match a.d {
        Some(d) => Some(d),
        None => config.get::<f64>("d")?,
    };
    let noise = d
        .map(|d| {
            NoiseConfig::with_intensity(
                config.resolve(a.kind, "kind", NoiseKind::Additive)?,
                config.resolve(a.stage, "stage", NoiseStage::InputCurrent)?,
                config.resolve(a.sharing, "sharing", Sharing::Uncommon)?,
                d,
                config.resolve(a.seed, "seed", 0u64)?,
            )
            .map_err(usage)
        })
        .transpose()?;
    let reps = positive("reps", config.resolve(a.reps, "reps", DEFAULT_NETWORK_REPS)?)?;
    let stats = evaluate(&model, &data, noise.as_ref(), reps)?;
    match &noise {
        Some(n) => println!(
            "accuracy {:.6} (std {:.6} over {} reps; {} {} {} D={}) on {} images",
            stats.mean,
            stats.std(),
            reps,
            n.sharing,
            n.stage,
            n.kind,
            d.unwrap_or_default(),
            data.len()
        ),
        None => println!("accuracy {:.6} on {} images", stats.mean, data.len()),
    }
    Ok(())
}

fn fetch_gz(base: &str, name: &str) -> Result<Vec<u8>, CliError> {
    let source = format!("{}/{name}.gz", base.trim_end_matches('/'));
    if source.starts_with("http://") || source.starts_with("https://") {
        let response = reqwest::blocking::get(&source)
            .and_then(|r| r.error_for_status())
            .map_err(|e| CliError::Other(format!("download {source}: {e}")))?;
        let bytes = response
            .bytes()
            .map_err(|e| CliError::Other(format!("download {source}: {e}")))?;
        Ok(bytes.to_vec())
    } else {
        let path = source.strip_prefix("file://").unwrap_or(&source);
        fs::read(path).map_err(|e| CliError::io(format!("read {path}"), e))
    }
}

fn cmd_fetch(a: &FetchArgs, config: &Config) -> Result<(), CliError> {
    let dir = config.data_dir(a.data_dir.clone())?;
    let base = config.resolve(a.base_url.clone(), "base-url", DEFAULT_BASE_URL.to_string())?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("create {}", dir.display()), e))?;
    for name in [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS] {
        let target = dir.join(name);
        if target.exists() {
            eprintln!("{} already present", target.display());
            continue;
        }
        let gz = fetch_gz(&base, name)?;
        let mut raw = Vec::new();
        flate2::read::GzDecoder::new(gz.as_slice())
            .read_to_end(&mut raw)
            .map_err(|e| CliError::io(format!("decompress {name}.gz"), e))?;
        let partial = target.with_extension("part");
        fs::write(&partial, &raw).map_err(|e| CliError::io(format!("write {}", partial.display()), e))?;
        fs::rename(&partial, &target).map_err(|e| CliError::io(format!("rename {}", partial.display()), e))?;
        eprintln!("wrote {} ({} bytes)", target.display(), raw.len());
    }
    Ok(())
}

/// Re-read a sweep CSV and redraw its figure.
pub fn figure_from_csv(path: &Path) -> Result<String, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::io(format!("open {}", path.display()), e))?;
    let rows = read_sweep(f).map_err(|e| CliError::Other(e.to_string()))?;
    Ok(match rows.first() {
        Some(r) if r.metric == Metric::Accuracy => noise_sweep_figure(&rows),
        _ => single_neuron_figure(&rows),
    })
}
