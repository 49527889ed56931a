//! Seeded, splittable random streams.
//!
//! A stream is identified by a 64-bit key. Child streams are derived from
//! the parent key and a tag, never from the parent's draw position, so the
//! stream for `(seed, epoch, sample)` is the same no matter which worker
//! computes it or in what order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_key(parent: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(tag.wrapping_add(GOLDEN)))
}

/// Single-owner pseudo-random stream backed by ChaCha8.
#[derive(Clone, Debug)]
pub struct RngStream {
    key: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let mut bytes = [0u8; 32];
        let mut state = seed;
        for chunk in bytes.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self {
            key: seed,
            inner: ChaCha8Rng::from_seed(bytes),
        }
    }

    /// Stream for a path of tags below a base seed, e.g.
    /// `substream(seed, &[epoch, index])`.
    pub fn substream(base_seed: u64, path: &[u64]) -> Self {
        let key = path.iter().fold(base_seed, |k, &t| derive_key(k, t));
        Self::new(key)
    }

    /// Independent child stream. Splitting twice with the same tag yields
    /// the same child.
    pub fn split(&self, tag: u64) -> Self {
        Self::new(derive_key(self.key, tag))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, 1)` with 24 bits of precision.
    pub fn uniform_f32(&mut self) -> f32 {
        (self.next_u32() >> 8) as f32 * (1.0 / (1u32 << 24) as f32)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unbiased index in `[0, n)`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be non-empty");
        let n = n as u64;
        // Lemire's widening-multiply method with rejection.
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        assert!(lo <= hi);
        lo + self.index(hi - lo + 1)
    }

    /// Bernoulli trial: true with probability `p`. `p = 0` never fires and
    /// `p = 1` always fires.
    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}
