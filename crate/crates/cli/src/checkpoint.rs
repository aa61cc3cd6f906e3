//! `SNN1` model checkpoints.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SNN1"
//! 4       4     n_in        (u32 LE)
//! 8       4     n_hidden    (u32 LE)
//! 12      4     n_out       (u32 LE)
//! 16      4     t_window    (u32 LE)
//! 20      1     filter id   (0 none, 1 sigmoid, 2 tanh)
//! 21      1     flags       (bit 0 biases, bit 1 input scaling)
//! 22      2     reserved, zero
//! 24      8     beta        (f64 LE)
//! 32      8     u_threshold (f64 LE)
//! 40      ...   w_in, w_out[, b_hidden, b_out] as f64 LE, row-major
//! ```

use std::fs;
use std::path::Path;

use snn_lab_core::{Filter, LifParams, NetworkModel};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"SNN1";
pub const HEADER_LEN: usize = 40;

const FLAG_BIASES: u8 = 1;
const FLAG_INPUT_SCALING: u8 = 2;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic {found:?}, expected \"SNN1\"")]
    BadMagic { found: Vec<u8> },
    #[error("truncated checkpoint: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("checkpoint has {extra} trailing bytes after {expected} expected")]
    Trailing { expected: usize, extra: usize },
    #[error("unknown filter id {0}")]
    UnknownFilter(u8),
    #[error("invalid model: {0}")]
    Invalid(#[from] snn_lab_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn payload_len(n_in: usize, n_hidden: usize, n_out: usize, biases: bool) -> usize {
    let mut n = n_in * n_hidden + n_hidden * n_out;
    if biases {
        n += n_hidden + n_out;
    }
    n * 8
}

pub fn encode(model: &NetworkModel) -> Vec<u8> {
    let biases = model.has_biases();
    let mut out = Vec::with_capacity(
        HEADER_LEN + payload_len(model.n_in, model.n_hidden, model.n_out, biases),
    );
    out.extend_from_slice(MAGIC);
    for v in [model.n_in, model.n_hidden, model.n_out, model.t_window] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let mut flags = 0;
    if biases {
        flags |= FLAG_BIASES;
    }
    if model.lif.input_scaling {
        flags |= FLAG_INPUT_SCALING;
    }
    out.extend_from_slice(&[model.filter.id(), flags, 0, 0]);
    out.extend_from_slice(&model.lif.beta.to_le_bytes());
    out.extend_from_slice(&model.lif.u_threshold.to_le_bytes());
    let params = model
        .w_in
        .iter()
        .chain(&model.w_out)
        .chain(model.b_hidden.iter().flatten())
        .chain(model.b_out.iter().flatten());
    for w in params {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<NetworkModel, CheckpointError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic {
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let (n_in, n_hidden, n_out, t_window) = (
        u32_at(bytes, 4),
        u32_at(bytes, 8),
        u32_at(bytes, 12),
        u32_at(bytes, 16),
    );
    let filter = Filter::from_id(bytes[20]).ok_or(CheckpointError::UnknownFilter(bytes[20]))?;
    let flags = bytes[21];
    let biases = flags & FLAG_BIASES != 0;
    let lif = LifParams {
        beta: f64_at(bytes, 24),
        u_threshold: f64_at(bytes, 32),
        input_scaling: flags & FLAG_INPUT_SCALING != 0,
    };

    let expected = HEADER_LEN + payload_len(n_in, n_hidden, n_out, biases);
    if bytes.len() < expected {
        return Err(CheckpointError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(CheckpointError::Trailing {
            expected,
            extra: bytes.len() - expected,
        });
    }

    let mut cursor = HEADER_LEN;
    let mut take = |n: usize| -> Vec<f64> {
        let v = (0..n).map(|i| f64_at(bytes, cursor + 8 * i)).collect();
        cursor += 8 * n;
        v
    };
    let w_in = take(n_in * n_hidden);
    let w_out = take(n_hidden * n_out);
    let (b_hidden, b_out) = if biases {
        (Some(take(n_hidden)), Some(take(n_out)))
    } else {
        (None, None)
    };
    let model = NetworkModel {
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

pub fn save_model(model: &NetworkModel, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, encode(model)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<NetworkModel, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}
