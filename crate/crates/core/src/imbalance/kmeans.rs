//! Lloyd's algorithm with k-means++ seeding.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    /// Set when `k` exceeded the number of distinct points.
    pub clamped_from: Option<usize>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn distinct_count<P: AsRef<[f64]>>(points: &[P]) -> usize {
    let mut seen: Vec<&[f64]> = Vec::new();
    for p in points {
        let p = p.as_ref();
        if !seen.contains(&p) {
            seen.push(p);
        }
    }
    seen.len()
}

/// Panics on empty input or `k == 0`.
pub fn kmeans<P: AsRef<[f64]>>(points: &[P], k: usize, seed: u64) -> KMeans {
    assert!(!points.is_empty(), "kmeans needs at least one point");
    assert!(k >= 1, "kmeans needs k >= 1");
    let distinct = distinct_count(points);
    let (k, clamped_from) = if k > distinct { (distinct, Some(k)) } else { (k, None) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++: first center uniform, then proportional to squared distance.
    let mut centroids: Vec<Vec<f64>> = vec![points[rng.gen_range(0..points.len())].as_ref().to_vec()];
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p.as_ref(), &centroids).1).collect();
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(&mut rng),
            // every point sits on a center; cannot happen while k <= distinct
            Err(_) => unreachable!("k clamped to distinct point count"),
        };
        centroids.push(points[next].as_ref().to_vec());
    }

    let dim = points[0].as_ref().len();
    let mut assignments = vec![0; points.len()];
    let mut iterations = 0;
    for _ in 0..KMEANS_MAX_ITER {
        iterations += 1;
        for (a, p) in assignments.iter_mut().zip(points) {
            *a = nearest(p.as_ref(), &centroids).0;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (a, p) in assignments.iter().zip(points) {
            sizes[*a] += 1;
            for (s, v) in sums[*a].iter_mut().zip(p.as_ref()) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            if sizes[j] == 0 {
                continue; // empty cluster keeps its centroid
            }
            let new: Vec<f64> = sums[j].iter().map(|s| s / sizes[j] as f64).collect();
            shift = shift.max(sq_dist(&new, &centroids[j]).sqrt());
            centroids[j] = new;
        }
        if shift < KMEANS_TOL {
            break;
        }
    }
    for (a, p) in assignments.iter_mut().zip(points) {
        *a = nearest(p.as_ref(), &centroids).0;
    }
    let inertia = assignments.iter().zip(points).map(|(a, p)| sq_dist(p.as_ref(), &centroids[*a])).sum();
    KMeans { assignments, centroids, inertia, iterations, clamped_from }
}
