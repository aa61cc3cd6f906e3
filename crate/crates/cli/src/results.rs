//! CSV tables produced by the experiments.
//!
//! Sweep tables have the fixed header
//! `experiment_id,filter,stage,kind,sharing,d,rep,metric,value`, one row per
//! (grid point, repetition, metric). Real numbers are written with 17
//! significant digits so they parse back to the same bits.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use snn_lab_core::train::EpochLog;

pub const SWEEP_HEADER: [&str; 9] = [
    "experiment_id",
    "filter",
    "stage",
    "kind",
    "sharing",
    "d",
    "rep",
    "metric",
    "value",
];

pub const TRAIN_LOG_HEADER: [&str; 4] = ["epoch", "split", "loss", "accuracy"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Tp,
    Fp,
    Tn,
    Fn,
    Accuracy,
}

impl Metric {
    pub const CONFUSION: [Metric; 4] = [Metric::Tp, Metric::Fp, Metric::Tn, Metric::Fn];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Tp => "tp",
            Metric::Fp => "fp",
            Metric::Tn => "tn",
            Metric::Fn => "fn",
            Metric::Accuracy => "accuracy",
        }
    }

    fn is_count(self) -> bool {
        self != Metric::Accuracy
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tp" => Ok(Metric::Tp),
            "fp" => Ok(Metric::Fp),
            "tn" => Ok(Metric::Tn),
            "fn" => Ok(Metric::Fn),
            "accuracy" => Ok(Metric::Accuracy),
            other => Err(format!("unknown metric '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResultRow {
    pub experiment_id: String,
    pub filter: String,
    pub stage: String,
    pub kind: String,
    pub sharing: String,
    pub d: f64,
    pub rep: usize,
    pub metric: Metric,
    pub value: f64,
}

/// Lossless text form of a real number.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_value(metric: Metric, value: f64) -> String {
    if metric.is_count() && value.fract() == 0.0 && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        fmt_real(value)
    }
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepResultRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment_id.as_str(),
            &r.filter,
            &r.stage,
            &r.kind,
            &r.sharing,
            &fmt_real(r.d),
            &r.rep.to_string(),
            r.metric.name(),
            &fmt_value(r.metric, r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Field { line: usize, message: String },
}

pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepResultRow>, ReadError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(SWEEP_HEADER) {
        return Err(ReadError::Field {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |message: String| ReadError::Field { line, message };
        let real = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("'{s}': {e}")));
        rows.push(SweepResultRow {
            experiment_id: rec[0].to_string(),
            filter: rec[1].to_string(),
            stage: rec[2].to_string(),
            kind: rec[3].to_string(),
            sharing: rec[4].to_string(),
            d: real(&rec[5])?,
            rep: rec[6].parse().map_err(|e| bad(format!("rep: {e}")))?,
            metric: rec[7].parse().map_err(bad)?,
            value: real(&rec[8])?,
        });
    }
    Ok(rows)
}

pub fn write_train_log<W: Write>(out: W, log: &[EpochLog]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAIN_LOG_HEADER)?;
    for row in log {
        w.write_record([
            row.epoch.to_string(),
            row.split.name().to_string(),
            fmt_real(row.loss),
            fmt_real(row.accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(d: f64, value: f64, metric: Metric) -> SweepResultRow {
        SweepResultRow {
            experiment_id: "noise-uncommon".into(),
            filter: "sigmoid".into(),
            stage: "input".into(),
            kind: "additive".into(),
            sharing: "uncommon".into(),
            d,
            rep: 3,
            metric,
            value,
        }
    }

    #[test]
    fn header_and_count_format() {
        let mut buf = Vec::new();
        write_sweep(&mut buf, &[row(0.5, 81.0, Metric::Tp)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "experiment_id,filter,stage,kind,sharing,d,rep,metric,value");
        assert_eq!(
            lines.next().unwrap(),
            "noise-uncommon,sigmoid,input,additive,uncommon,5.0000000000000000e-1,3,tp,81"
        );
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_sweep("a,b\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn reals_round_trip(d in any::<f64>().prop_filter("finite", |x| x.is_finite()),
                            v in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let rows = vec![row(d, v, Metric::Accuracy)];
            let mut buf = Vec::new();
            write_sweep(&mut buf, &rows).unwrap();
            let back = read_sweep(buf.as_slice()).unwrap();
            prop_assert_eq!(back[0].d.to_bits(), d.to_bits());
            prop_assert_eq!(back[0].value.to_bits(), v.to_bits());
        }
    }
}
