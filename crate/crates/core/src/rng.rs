//! Counter-based random numbers (Philox4x32-10).
//!
//! Every Gaussian draw is a pure function of `(seed, trial, step, lane)`, so
//! trials and neurons can be evaluated in any order or in parallel and still
//! see the same noise.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Ten-round Philox bijection on a 128-bit counter under a 64-bit key.
#[inline]
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Uniform in `(0, 1]` from the top 53 bits.
#[inline]
fn open_closed_unit(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Keyed source of independent standard-normal pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: [u32; 2],
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
        }
    }

    #[inline]
    pub fn raw(&self, trial: u64, step: u32, lane: u32) -> [u32; 4] {
        philox4x32([step, lane, trial as u32, (trial >> 32) as u32], self.key)
    }

    /// Two independent N(0, 1) values for one counter position (Box-Muller).
    #[inline]
    pub fn normal_pair(&self, trial: u64, step: u32, lane: u32) -> (f64, f64) {
        let w = self.raw(trial, step, lane);
        let a = (u64::from(w[0]) << 32) | u64::from(w[1]);
        let b = (u64::from(w[2]) << 32) | u64::from(w[3]);
        let radius = (-2.0 * open_closed_unit(a).ln()).sqrt();
        let angle = std::f64::consts::TAU * unit(b);
        (radius * angle.cos(), radius * angle.sin())
    }
}
