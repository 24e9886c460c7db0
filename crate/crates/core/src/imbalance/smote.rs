//! SMOTE: synthetic minority points on segments between a sample and one
//! of its nearest same-class neighbors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SMOTE_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPoint {
    pub base: usize,
    /// `None` when the class has a single sample and the point is a copy.
    pub neighbor: Option<usize>,
    pub lambda: f64,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SmoteOutput {
    pub points: Vec<SyntheticPoint>,
    pub warning: Option<String>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest other points, by distance then index.
pub(crate) fn nearest_neighbors<P: AsRef<[f64]>>(points: &[P], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> =
        (0..points.len()).filter(|&j| j != i).map(|j| (sq_dist(points[i].as_ref(), points[j].as_ref()), j)).collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.truncate(k);
    others.into_iter().map(|(_, j)| j).collect()
}

pub(crate) fn interpolate(base: &[f64], neighbor: &[f64], lambda: f64) -> Vec<f64> {
    base.iter().zip(neighbor).map(|(b, n)| b + lambda * (n - b)).collect()
}

/// Generate `n_synthetic` points from the samples of one class.
///
/// Bases cycle through the class in order so every sample seeds roughly the
/// same number of points; the neighbor and `λ ~ U[0, 1)` are drawn per point.
pub fn smote<P: AsRef<[f64]>>(features: &[P], k: usize, n_synthetic: usize, seed: u64) -> SmoteOutput {
    let mut out = SmoteOutput::default();
    if features.is_empty() || n_synthetic == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if features.len() == 1 {
        out.warning = Some("class has a single sample; SMOTE emitted exact copies".into());
        for _ in 0..n_synthetic {
            out.points.push(SyntheticPoint {
                base: 0,
                neighbor: None,
                lambda: 0.0,
                features: features[0].as_ref().to_vec(),
            });
        }
        return out;
    }
    let k = k.max(1).min(features.len() - 1);
    let neighbors: Vec<Vec<usize>> = (0..features.len()).map(|i| nearest_neighbors(features, i, k)).collect();
    for s in 0..n_synthetic {
        let base = s % features.len();
        let neighbor = neighbors[base][rng.gen_range(0..k)];
        let lambda: f64 = rng.gen();
        out.points.push(SyntheticPoint {
            base,
            neighbor: Some(neighbor),
            lambda,
            features: interpolate(features[base].as_ref(), features[neighbor].as_ref(), lambda),
        });
    }
    out
}
