//! Seeded randomness helpers shared by sampling and cross-validation.
//!
//! All stochastic behavior in the crate flows through ChaCha8 seeded from a
//! caller-supplied `u64`, so identical seeds give identical results across
//! platforms and runs.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from `0..bound` via rejection sampling (no modulo bias).
pub fn uniform_below(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    assert!(bound > 0, "uniform_below requires a positive bound");
    let bound = bound as u64;
    // Reject draws below the smallest multiple-of-bound threshold.
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let value = rng.next_u64();
        if value >= threshold {
            return (value % bound) as usize;
        }
    }
}

/// Fisher-Yates shuffle of `0..n`.
pub fn shuffled_indices(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = uniform_below(rng, i + 1);
        indices.swap(i, j);
    }
    indices
}

/// `k` distinct indices drawn uniformly from `0..n`, in ascending order.
pub fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot sample {k} items from a population of {n}");
    let mut picked = shuffled_indices(rng, n);
    picked.truncate(k);
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let a = shuffled_indices(&mut rng_from_seed(7), 20);
        let b = shuffled_indices(&mut rng_from_seed(7), 20);
        assert_eq!(a, b);
        let c = shuffled_indices(&mut rng_from_seed(8), 20);
        assert_ne!(a, c);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut got = shuffled_indices(&mut rng_from_seed(3), 50);
        got.sort_unstable();
        let want: Vec<usize> = (0..50).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn uniform_below_stays_in_range() {
        let mut rng = rng_from_seed(11);
        for bound in [1usize, 2, 3, 7, 100] {
            for _ in 0..200 {
                assert!(uniform_below(&mut rng, bound) < bound);
            }
        }
    }

    #[test]
    fn sample_indices_are_distinct_and_sorted() {
        let mut rng = rng_from_seed(5);
        let picked = sample_indices(&mut rng, 30, 10);
        assert_eq!(picked.len(), 10);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
        assert!(picked.iter().all(|&i| i < 30));
    }

    #[test]
    fn sampling_everything_returns_all_indices() {
        let mut rng = rng_from_seed(5);
        let picked = sample_indices(&mut rng, 8, 8);
        assert_eq!(picked, (0..8).collect::<Vec<_>>());
    }
}
