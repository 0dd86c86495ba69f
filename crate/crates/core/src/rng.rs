//! Seedable, stream-splittable randomness.
//!
//! Every random draw in the crate goes through [`RandomSource`]. A source is
//! a ChaCha12 generator keyed by a master seed and positioned on one of
//! `2^64` independent streams.

use crate::param::ParamVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Deterministic random source identified by `(master_seed, stream_index)`.
#[derive(Clone, Debug)]
pub struct RandomSource {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha12Rng,
}

impl RandomSource {
    /// Opens stream `stream_index` of the generator keyed by `master_seed`.
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        RandomSource { master_seed, stream_index, rng }
    }

    /// Master seed.
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Stream index.
    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// A fresh source on a stream derived from this one and `tag`.
    ///
    /// Distinct `(stream_index, tag)` pairs map to distinct streams with
    /// overwhelming probability.
    pub fn child(&self, tag: u64) -> RandomSource {
        RandomSource::new(self.master_seed, derive_stream(self.stream_index, tag))
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Vector of `n` independent standard normal draws.
    pub fn normal_vec(&mut self, n: usize) -> ParamVector {
        let mut v = ParamVector::zeros(n);
        for x in v.iter_mut() {
            *x = self.standard_normal();
        }
        v
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Draws from a finite distribution given by `probs`.
    ///
    /// Probabilities need not be normalized; the last index with positive
    /// weight absorbs rounding.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let total: f64 = probs.iter().sum();
        let u = self.uniform() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                last = i;
                acc += p;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream index derived from a parent index and a tag.
pub fn derive_stream(parent: u64, tag: u64) -> u64 {
    mix64(mix64(parent.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ tag)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream_is_reproducible() {
        let mut a = RandomSource::new(7, 3);
        let mut b = RandomSource::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RandomSource::new(7, 0);
        let mut b = RandomSource::new(7, 1);
        let xs: alloc::vec::Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: alloc::vec::Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn streams_are_uncorrelated() {
        let mut a = RandomSource::new(11, 0);
        let mut b = RandomSource::new(11, 1);
        let n = 20_000;
        let mut s = 0.0;
        for _ in 0..n {
            s += a.standard_normal() * b.standard_normal();
        }
        let corr = s / n as f64;
        assert!(corr.abs() < 4.0 / libm::sqrt(n as f64), "corr = {corr}");
    }

    #[test]
    fn categorical_respects_zero_weights() {
        let mut r = RandomSource::new(1, 1);
        for _ in 0..1000 {
            assert_eq!(r.categorical(&[0.0, 1.0, 0.0]), 1);
        }
    }
}
