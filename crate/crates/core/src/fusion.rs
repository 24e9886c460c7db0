//! Fuse image-model probabilities with the geo prior.
//!
//! Under conditional independence of image and location given the class,
//! `P(y | I, x) ∝ P(y | I) · P(y | x)`. The product is taken in log space
//! after flooring each input at `epsilon` times its own largest entry, then
//! renormalized. Scaling the floor with the row keeps the result invariant to
//! rescaling either input.

use std::collections::{HashMap, HashSet};

use crate::domain::{ClassVocabulary, ProbVector};
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-12;

pub fn fuse_posteriors(p_image: &ProbVector, p_geo: &ProbVector, epsilon: f64) -> Result<ProbVector> {
    fuse_scores(p_image.as_slice(), p_geo.as_slice(), epsilon)
}

/// Fusion of non-negative scores that need not sum to one; any positive
/// rescaling of either input gives the same result.
pub fn fuse_scores(image: &[f64], geo: &[f64], epsilon: f64) -> Result<ProbVector> {
    if image.len() != geo.len() {
        return Err(Error::LengthMismatch { left: image.len(), right: geo.len() });
    }
    // entries relative to the row maximum, so x/x = 1 exactly and
    // structural ties survive rescaling bit for bit
    let relative = |v: &[f64]| -> Result<Vec<f64>> {
        let m = v.iter().copied().fold(0.0, f64::max);
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidProbability("fusion input has no positive entry".into()));
        }
        Ok(v.iter().map(|x| (x / m).max(epsilon).ln()).collect())
    };
    let logs: Vec<f64> = relative(image)?.iter().zip(relative(geo)?).map(|(a, b)| a + b).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ProbVector::normalize(logs.into_iter().map(|l| (l - max).exp()).collect()))
}

/// Indices of the `k` largest entries, descending. Ties go to the lower index.
pub fn top_k(p: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > p.len() {
        return Err(Error::KOutOfRange { k, classes: p.len() });
    }
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

/// Whether `class` is among the top `k` under the same tie rule as [`top_k`],
/// without sorting: count entries that would rank ahead of it.
pub fn in_top_k(p: &[f64], class: usize, k: usize) -> bool {
    let target = p[class];
    let ahead = p.iter().enumerate().filter(|&(i, v)| *v > target || (*v == target && i < class)).count();
    ahead < k
}

/// Labels of the top-k classes.
pub fn top_k_labels<'a>(p: &ProbVector, k: usize, vocabulary: &'a ClassVocabulary) -> Result<Vec<&'a str>> {
    Ok(top_k(p.as_slice(), k)?.into_iter().map(|i| vocabulary.label(i)).collect())
}

/// Rows of probability vectors keyed by observation id, over one vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    vocabulary: ClassVocabulary,
    ids: Vec<String>,
    rows: Vec<ProbVector>,
    index: HashMap<String, usize>,
}

impl ProbMatrix {
    pub fn new(vocabulary: ClassVocabulary) -> Self {
        Self { vocabulary, ids: Vec::new(), rows: Vec::new(), index: HashMap::new() }
    }

    pub fn push(&mut self, obs_id: impl Into<String>, row: ProbVector) -> Result<()> {
        let obs_id = obs_id.into();
        if row.len() != self.vocabulary.len() {
            return Err(Error::LengthMismatch { left: self.vocabulary.len(), right: row.len() });
        }
        if self.index.contains_key(&obs_id) {
            return Err(Error::CorruptFile(format!("duplicate obs_id {obs_id:?} in probability matrix")));
        }
        self.index.insert(obs_id.clone(), self.rows.len());
        self.ids.push(obs_id);
        self.rows.push(row);
        Ok(())
    }

    pub fn vocabulary(&self) -> &ClassVocabulary {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> &[ProbVector] {
        &self.rows
    }

    pub fn get(&self, obs_id: &str) -> Option<&ProbVector> {
        self.index.get(obs_id).map(|&i| &self.rows[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ProbVector)> {
        self.ids.iter().map(String::as_str).zip(&self.rows)
    }
}

/// Row-wise fusion keyed by obs_id. Output order follows `image`.
pub fn fuse_file(image: &ProbMatrix, geo: &ProbMatrix, epsilon: f64) -> Result<ProbMatrix> {
    if image.vocabulary.labels() != geo.vocabulary.labels() {
        return Err(Error::HeaderMismatch(format!(
            "image file has {} classes, geo file has {} classes, or their order differs",
            image.vocabulary.len(),
            geo.vocabulary.len()
        )));
    }
    let image_ids: HashSet<&str> = image.ids.iter().map(String::as_str).collect();
    if let Some(extra) = geo.ids.iter().find(|id| !image_ids.contains(id.as_str())) {
        return Err(Error::MissingObservation(extra.clone()));
    }
    let mut out = ProbMatrix::new(image.vocabulary.clone());
    for (id, p_image) in image.iter() {
        let p_geo = geo.get(id).ok_or_else(|| Error::MissingObservation(id.to_string()))?;
        out.push(id, fuse_posteriors(p_image, p_geo, epsilon)?)?;
    }
    Ok(out)
}
