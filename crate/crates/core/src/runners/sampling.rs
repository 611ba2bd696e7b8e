use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::{Error, Result};

/// Draws items a user never interacted with positively in train.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    n_items: usize,
    /// Sorted train-positive items per user.
    positives: Vec<Vec<usize>>,
}

impl NegativeSampler {
    pub fn new(corpus: &Corpus) -> Self {
        NegativeSampler {
            n_items: corpus.n_items,
            positives: corpus.train_positive_sets(),
        }
    }

    pub fn is_positive(&self, user: usize, item: usize) -> bool {
        self.positives.get(user).is_some_and(|p| p.binary_search(&item).is_ok())
    }

    /// `n` distinct items, uniformly without replacement, excluding the
    /// user's train positives and `exclude`. Collisions are redrawn.
    pub fn sample(&self, rng: &mut impl Rng, user: usize, n: usize, exclude: &[usize]) -> Result<Vec<usize>> {
        let blocked = |i: usize| self.is_positive(user, i) || exclude.contains(&i);
        let n_blocked = self.positives.get(user).map_or(0, Vec::len)
            + exclude.iter().filter(|&&i| i < self.n_items && !self.is_positive(user, i)).count();
        let eligible = self.n_items.saturating_sub(n_blocked);
        if eligible < n {
            return Err(Error::NotEnoughNegatives {
                user,
                eligible,
                requested: n,
            });
        }
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let i = rng.random_range(0..self.n_items);
            if !blocked(i) && !out.contains(&i) {
                out.push(i);
            }
        }
        Ok(out)
    }
}

/// Convenience form of [`NegativeSampler::sample`] for one-off draws.
pub fn sample_negatives(rng: &mut impl Rng, user: usize, n: usize, corpus: &Corpus) -> Result<Vec<usize>> {
    NegativeSampler::new(corpus).sample(rng, user, n, &[])
}

/// Deterministic per-interaction seed for evaluation candidates, so dev and
/// test lists are identical in every epoch and every run with `seed`.
pub fn eval_seed(seed: u64, user: usize, item: usize) -> u64 {
    let mut x = seed;
    for v in [user as u64, item as u64] {
        x = splitmix(x ^ splitmix(v));
    }
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn eval_rng(seed: u64, user: usize, item: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(eval_seed(seed, user, item))
}
