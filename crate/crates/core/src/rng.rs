//! Seeded randomness.
//!
//! Every random draw in the toolkit comes from a [`SeededRng`], a ChaCha8
//! stream keyed by a 64-bit seed. Work items never share a stream: each one
//! gets a child seed computed by [`derive_item_seed`] from the master seed and
//! the item's index, so results do not depend on execution order.

use std::f64::consts::TAU;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name of the underlying generator, recorded in manifests.
pub const RNG_ALGORITHM: &str = "chacha8";

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer. A bijection on `u64`.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for work item `index` under `master_seed`.
///
/// For a fixed master seed this is a composition of bijections of `index`,
/// so distinct indices never collide.
pub fn derive_item_seed(master_seed: u64, index: u64) -> u64 {
    mix64(mix64(index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(GOLDEN_GAMMA)) ^ master_seed)
}

/// Deterministic random stream (ChaCha8 seeded from a `u64`).
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for item `index`, keyed only by this stream's seed.
    pub fn child(&self, index: u64) -> Self {
        Self::new(derive_item_seed(self.seed, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform on the open interval `(lo, hi)`.
    pub fn uniform_between(&mut self, lo: f64, hi: f64) -> f64 {
        loop {
            let x = lo + (hi - lo) * self.uniform_open();
            if x > lo && x < hi {
                return x;
            }
        }
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi, "empty integer range {lo}..={hi}");
        self.inner.random_range(lo..=hi)
    }

    /// Two independent N(0, 1) draws via the Box–Muller transform.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// A single N(0, 1) draw (the second Box–Muller output is discarded).
    pub fn standard_normal(&mut self) -> f64 {
        self.normal_pair().0
    }
}
