//! Seeded, splittable randomness.
//!
//! Every random draw in the crate goes through [`Rng`], a ChaCha8 stream keyed
//! by a 64-bit seed. Child generators are derived with [`Rng::split`], which
//! depends only on the parent seed and the tag, never on how much of the parent
//! stream was consumed. That keeps parallel work (per-hyperplane, per-instance)
//! reproducible regardless of scheduling.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::Scalar;

/// Purpose tags for sub-seeds.
pub mod tags {
    pub const INIT: u64 = 0x1;
    pub const HYPERPLANES: u64 = 0x2;
    pub const NOISE: u64 = 0x3;
    pub const DATA: u64 = 0x4;
    pub const RESCUE: u64 = 0x5;
    pub const VALIDATION: u64 = 0x6;
    pub const MODEL: u64 = 0x7;
    pub const GREEDY: u64 = 0x8;
}

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream. Pure function of `(self.seed, tag)`.
    pub fn split(&self, tag: u64) -> Rng {
        Rng::new(splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0xD1B5_4A32_D192_ED03))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `[0, n)`. Sampled through `u64` so the stream does
    /// not depend on the platform's pointer width.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.inner.random_range(0..n as u64) as usize
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn between(&mut self, lo: usize, hi: usize) -> usize {
        assert!(lo <= hi);
        lo + self.below(hi - lo + 1)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn gaussian<T: Scalar>(&mut self) -> T {
        let x: f64 = self.inner.sample(StandardNormal);
        T::lit(x)
    }

    pub fn fill_gaussian<T: Scalar>(&mut self, out: &mut [T]) {
        for x in out {
            *x = self.gaussian();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_ignores_consumption() {
        let a = Rng::new(7);
        let mut b = Rng::new(7);
        b.next_u64();
        assert_eq!(a.split(3).next_u64(), b.split(3).next_u64());
        assert_ne!(a.split(3).next_u64(), a.split(4).next_u64());
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = Rng::new(1);
        for n in 1..50 {
            assert!(r.below(n) < n);
        }
    }
}
