//! Seeded source of every nondeterministic choice in a simulation.

use crate::rational::Rational;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Oracle {
    seed: u64,
    rng: ChaCha8Rng,
}

impl Oracle {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// An independent stream for the same seed, e.g. one per search trial.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `0..bound`; `bound` must be positive.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        self.rng.gen_range(0..bound)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.gen()
    }

    /// Picks `k` items (all of them if fewer), returned in their input order.
    pub fn choose_k<T: Clone>(&mut self, items: &[T], k: usize) -> Vec<T> {
        if k >= items.len() {
            return items.to_vec();
        }
        let mut idx: Vec<usize> = (0..items.len()).collect();
        idx.partial_shuffle(&mut self.rng, k);
        let mut picked: Vec<usize> = idx[..k].to_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| items[i].clone()).collect()
    }

    /// True with probability `p`; certain outcomes consume no randomness.
    pub fn bernoulli(&mut self, p: &Rational) -> bool {
        if p >= &Rational::one() {
            return true;
        }
        if !p.is_positive() {
            return false;
        }
        let x = BigInt::from(self.rng.gen::<u64>());
        // x / 2^64 < num / den
        x * p.denom() < p.numer() * (BigInt::one() << 64)
    }

    /// Each item kept independently with probability `p`.
    pub fn choose_subset<T: Clone>(&mut self, items: &[T], p: &Rational) -> Vec<T> {
        if p.is_zero() {
            return Vec::new();
        }
        items
            .iter()
            .filter(|_| self.bernoulli(p))
            .cloned()
            .collect()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Oracle::new(7);
        let mut b = Oracle::new(7);
        let items: Vec<u32> = (0..50).collect();
        for _ in 0..20 {
            assert_eq!(a.choose_k(&items, 5), b.choose_k(&items, 5));
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = Oracle::with_stream(7, 0);
        let mut b = Oracle::with_stream(7, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn choose_k_keeps_input_order() {
        let mut o = Oracle::new(1);
        let items: Vec<u32> = (0..30).collect();
        let pick = o.choose_k(&items, 10);
        assert_eq!(pick.len(), 10);
        assert!(pick.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(o.choose_k(&items[..3], 10), vec![0, 1, 2]);
    }

    #[test]
    fn bernoulli_extremes_and_rate() {
        let mut o = Oracle::new(3);
        assert!(o.bernoulli(&ratio(1, 1)));
        assert!(!o.bernoulli(&ratio(0, 1)));
        let hits = (0..4000).filter(|_| o.bernoulli(&ratio(1, 4))).count();
        assert!((800..1200).contains(&hits), "{hits}");
    }
}
