//! Keyed, splittable random streams.
//!
//! Every random quantity in the crate is addressed by a [`SeedKey`]: a purpose
//! tag plus semantic coordinates (repetition, estimator, layer, row, column).
//! [`derive_seed`] hashes the key into a 64-bit seed and [`RngStream`] expands
//! a seed into a SplitMix64 sequence. Nothing reads global state, so a weight's
//! initial value depends only on its address.
//!
//! Each purpose has a dependency set. Coordinates outside it are zeroed before
//! hashing, so for example mask positions are shared by every repetition and
//! ensemble member.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// What a derived seed is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Purpose {
    /// Which inputs of an output unit are frozen. Depends on (layer, row).
    MaskPositions,
    /// Value of a frozen weight. Depends on (layer, row, col).
    FrozenValue,
    /// Trainable weight init. Depends on every coordinate.
    FreeWeight,
    /// Bias init. Depends on every coordinate.
    Bias,
    /// Mini-batch order; `row` carries the epoch.
    Shuffle,
    /// Gumbel gate noise; `row`/`col` carry epoch and batch.
    GumbelNoise,
    /// Train/val/test partition.
    DataSplit,
    /// Synthetic dataset generation.
    Synthetic,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::MaskPositions => 0x6d61_736b_706f_7331,
            Purpose::FrozenValue => 0x6672_6f7a_656e_7631,
            Purpose::FreeWeight => 0x6672_6565_7767_7431,
            Purpose::Bias => 0x6269_6173_6269_6131,
            Purpose::Shuffle => 0x7368_7566_666c_6531,
            Purpose::GumbelNoise => 0x6775_6d62_656c_6e31,
            Purpose::DataSplit => 0x7370_6c69_7464_7331,
            Purpose::Synthetic => 0x7379_6e74_6865_7431,
        }
    }

    /// Whether repetition and estimator take part in the seed.
    fn uses_run_coordinates(self) -> bool {
        !matches!(self, Purpose::MaskPositions | Purpose::FrozenValue)
    }
}

/// Semantic address of a random draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedKey {
    pub purpose: Purpose,
    pub repetition: u64,
    pub estimator: u64,
    pub layer: u64,
    pub row: u64,
    pub col: u64,
}

impl SeedKey {
    pub fn new(purpose: Purpose) -> Self {
        SeedKey {
            purpose,
            repetition: 0,
            estimator: 0,
            layer: 1,
            row: 0,
            col: 0,
        }
    }

    pub fn mask(layer: usize, row: usize) -> Self {
        SeedKey {
            layer: layer as u64,
            row: row as u64,
            ..Self::new(Purpose::MaskPositions)
        }
    }

    pub fn frozen(layer: usize, row: usize, col: usize) -> Self {
        SeedKey {
            layer: layer as u64,
            row: row as u64,
            col: col as u64,
            ..Self::new(Purpose::FrozenValue)
        }
    }

    pub fn free_weight(rep: usize, est: usize, layer: usize, row: usize, col: usize) -> Self {
        SeedKey {
            repetition: rep as u64,
            estimator: est as u64,
            layer: layer as u64,
            row: row as u64,
            col: col as u64,
            ..Self::new(Purpose::FreeWeight)
        }
    }

    pub fn bias(rep: usize, est: usize, layer: usize, row: usize) -> Self {
        SeedKey {
            repetition: rep as u64,
            estimator: est as u64,
            layer: layer as u64,
            row: row as u64,
            ..Self::new(Purpose::Bias)
        }
    }

    pub fn with_run(mut self, rep: usize, est: usize) -> Self {
        self.repetition = rep as u64;
        self.estimator = est as u64;
        self
    }

    pub fn with_cell(mut self, row: u64, col: u64) -> Self {
        self.row = row;
        self.col = col;
        self
    }

    pub fn stream(self) -> RngStream {
        RngStream::new(derive_seed(self))
    }
}

/// Hash a key into a 64-bit seed, ignoring coordinates outside the
/// purpose's dependency set.
pub fn derive_seed(key: SeedKey) -> u64 {
    let (rep, est) = if key.purpose.uses_run_coordinates() {
        (key.repetition, key.estimator)
    } else {
        (0, 0)
    };
    let col = if key.purpose == Purpose::MaskPositions {
        0
    } else {
        key.col
    };
    let mut h = mix64(key.purpose.tag());
    for field in [rep, est, key.layer, key.row, col] {
        h = mix64(h.wrapping_add(GOLDEN) ^ field);
    }
    h
}

/// SplitMix64 stream. A plain value: copy it to fork, move it to a worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub state: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidRange { lo, hi });
        }
        let v = lo + (hi - lo) * self.next_f64();
        // rounding can land on `hi` when the range is a few ulps wide
        Ok(if v < hi { v } else { lo })
    }

    /// Standard normal draw via Box–Muller (cosine branch only).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.next_open01();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Standard Gumbel draw, `-ln(-ln U)`.
    pub fn gumbel(&mut self) -> f64 {
        -(-self.next_open01().ln()).ln()
    }

    /// Unbiased integer in [0, n) (Lemire's multiply-and-reject).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from [0, n), in draw order (partial Fisher–Yates).
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Result<Vec<usize>> {
        if k > n {
            return Err(Error::InvalidArgument(format!(
                "cannot sample {k} of {n} without replacement"
            )));
        }
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        Ok(pool)
    }
}
