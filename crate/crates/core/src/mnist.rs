//! MNIST in the IDX container format.
//!
//! Layout (all integers big-endian u32): magic, item count, then for images
//! the row and column counts, followed by one unsigned byte per pixel or label.
//! Pixels are normalized as `byte / 255`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;
pub const CLASSES: usize = 10;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Row-major image bytes, `n × 784`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageMatrix {
    pub n: usize,
    pub bytes: Vec<u8>,
}

impl ImageMatrix {
    pub fn row(&self, i: usize) -> &[u8] {
        &self.bytes[i * PIXELS..(i + 1) * PIXELS]
    }

    /// Normalized pixel value in `[0, 1]`.
    pub fn pixel(&self, i: usize, p: usize) -> f64 {
        f64::from(self.bytes[i * PIXELS + p]) / 255.0
    }

    pub fn normalized_row(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&b| f64::from(b) / 255.0).collect()
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| Error::Parse {
            offset: self.pos,
            message: format!("truncated header while reading {what}"),
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if available < len {
            return Err(Error::Parse {
                offset: self.bytes.len(),
                message: format!("truncated payload: expected {len} bytes, found {available}"),
            });
        }
        if available > len {
            return Err(Error::Parse {
                offset: self.pos + len,
                message: format!("{} trailing bytes after payload", available - len),
            });
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }
}

fn expect_magic(r: &mut Reader<'_>, magic: u32) -> Result<()> {
    let found = r.u32("magic")?;
    if found != magic {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad magic {found:#010x}, expected {magic:#010x}"),
        });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<ImageMatrix> {
    let mut r = Reader { bytes, pos: 0 };
    expect_magic(&mut r, IMAGE_MAGIC)?;
    let n = r.u32("image count")? as usize;
    for (offset, what) in [(8, "rows"), (12, "columns")] {
        let dim = r.u32(what)? as usize;
        if dim != SIDE {
            return Err(Error::Parse {
                offset,
                message: format!("{what} = {dim}, expected {SIDE}"),
            });
        }
    }
    let payload = r.payload(n * PIXELS)?;
    Ok(ImageMatrix {
        n,
        bytes: payload.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = Reader { bytes, pos: 0 };
    expect_magic(&mut r, LABEL_MAGIC)?;
    let n = r.u32("label count")? as usize;
    let header = r.pos;
    let payload = r.payload(n)?;
    if let Some(i) = payload.iter().position(|&l| usize::from(l) >= CLASSES) {
        return Err(Error::Parse {
            offset: header + i,
            message: format!("label {} outside 0..{CLASSES}", payload[i]),
        });
    }
    Ok(payload.to_vec())
}

pub fn encode_idx_images(images: &ImageMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.bytes.len());
    for v in [IMAGE_MAGIC, images.n as u32, SIDE as u32, SIDE as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.bytes);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Images paired with labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub images: ImageMatrix,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(images: ImageMatrix, labels: Vec<u8>) -> Result<Self> {
        if images.n != labels.len() {
            return Err(Error::LengthMismatch {
                expected: images.n,
                actual: labels.len(),
            });
        }
        if images.bytes.len() != images.n * PIXELS {
            return Err(Error::Dimension {
                context: "image matrix",
                expected: images.n * PIXELS,
                actual: images.bytes.len(),
            });
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> Vec<f64> {
        self.images.normalized_row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        usize::from(self.labels[i])
    }

    /// First `n` samples (or all, if fewer).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: ImageMatrix {
                n,
                bytes: self.images.bytes[..n * PIXELS].to_vec(),
            },
            labels: self.labels[..n].to_vec(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut bytes = Vec::with_capacity(indices.len() * PIXELS);
        for &i in indices {
            bytes.extend_from_slice(self.images.row(i));
        }
        Dataset {
            images: ImageMatrix {
                n: indices.len(),
                bytes,
            },
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn from_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Self> {
        Self::new(parse_idx_images(image_bytes)?, parse_idx_labels(label_bytes)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn files(self) -> (&'static str, &'static str) {
        match self {
            Split::Train => (TRAIN_IMAGES, TRAIN_LABELS),
            Split::Test => (TEST_IMAGES, TEST_LABELS),
        }
    }
}

/// IO or parse failure while loading a split from disk.
#[derive(Debug)]
pub enum LoadError {
    Missing(PathBuf),
    Io(PathBuf, std::io::Error),
    Format(PathBuf, Error),
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadError::Missing(p) => write!(f, "missing MNIST file: {}", p.display()),
            LoadError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            LoadError::Format(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for LoadError {}

fn read(path: &Path) -> std::result::Result<Vec<u8>, LoadError> {
    if !path.exists() {
        return Err(LoadError::Missing(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| LoadError::Io(path.to_path_buf(), e))
}

pub fn load_split(dir: &Path, split: Split) -> std::result::Result<Dataset, LoadError> {
    let (img_name, lbl_name) = split.files();
    let (img_path, lbl_path) = (dir.join(img_name), dir.join(lbl_name));
    let images = parse_idx_images(&read(&img_path)?).map_err(|e| LoadError::Format(img_path, e))?;
    let labels = parse_idx_labels(&read(&lbl_path)?).map_err(|e| LoadError::Format(lbl_path.clone(), e))?;
    Dataset::new(images, labels).map_err(|e| LoadError::Format(lbl_path, e))
}

/// Index blocks of one epoch in a seed-determined order; the last may be short.
pub fn batches(n: usize, batch_size: usize, shuffle_seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
