use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// I.i.d. index draws with probability proportional to weight.
#[derive(Debug, Clone)]
pub struct WeightedDraws {
    dist: WeightedIndex<f64>,
}

impl WeightedDraws {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig("sampling weights must be finite and non-negative".into()));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::AllZeroWeights);
        }
        let dist = WeightedIndex::new(weights).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(Self { dist })
    }

    pub fn draw<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n).map(|_| self.dist.sample(rng)).collect()
    }
}

pub fn weighted_sampler(weights: &[f64], n_draws: usize, seed: u64) -> Result<Vec<usize>> {
    let draws = WeightedDraws::new(weights)?;
    Ok(draws.draw(n_draws, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Expand per-class weights to one weight per sample.
pub fn per_sample_weights(labels: &[usize], class_weights: &[f64]) -> Vec<f64> {
    labels.iter().map(|&y| class_weights[y]).collect()
}
