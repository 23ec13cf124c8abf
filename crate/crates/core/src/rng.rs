//! Seeded, splittable randomness.
//!
//! Every consumer of randomness takes a [`RandomSource`] explicitly. Parallel
//! or logically independent consumers get their own stream via
//! [`RandomSource::derive`], never a shared generator.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream keyed by `(seed, stream)`. Does not touch `self`'s state.
    pub fn derive(&self, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        Self { seed: self.seed, rng }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Draws an index with probability proportional to `weights`.
    ///
    /// Always consumes exactly one uniform. Zero-weight entries are never
    /// selected. Falls back to a uniform index when the total weight is zero.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let u = self.uniform();
        if total.is_nan() || total <= 0.0 {
            return ((u * weights.len() as f64) as usize).min(weights.len() - 1);
        }
        let target = u * total;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (k, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last_positive = k;
                if target < acc {
                    return k;
                }
            }
        }
        last_positive
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub(crate) fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RandomSource::new(7);
        let mut b = RandomSource::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derived_streams_differ() {
        let base = RandomSource::new(7);
        let mut a = base.derive(1);
        let mut b = base.derive(2);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut rng = RandomSource::new(3);
        for _ in 0..1000 {
            let k = rng.categorical(&[0.0, 1.0, 0.0, 2.0]);
            assert!(k == 1 || k == 3);
        }
    }

    #[test]
    fn categorical_degenerate() {
        let mut rng = RandomSource::new(3);
        for _ in 0..100 {
            assert_eq!(rng.categorical(&[1.0, 0.0, 0.0, 0.0]), 0);
        }
    }
}
