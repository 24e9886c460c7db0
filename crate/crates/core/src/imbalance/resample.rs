//! Resampling plans: which samples (original, duplicated or synthetic) make
//! up the rebalanced training set.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{class_seed, kmeans, smote, ClassCounts};
use crate::domain::ClassVocabulary;
use crate::error::{Error, Result};
use crate::io::format_float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    Weights,
    Oversample,
    Undersample,
    Smote,
    Cluster,
}

impl fmt::Display for PlanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanKind::Weights => "weights",
            PlanKind::Oversample => "oversample",
            PlanKind::Undersample => "undersample",
            PlanKind::Smote => "smote",
            PlanKind::Cluster => "cluster",
        })
    }
}

impl FromStr for PlanKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "weights" => PlanKind::Weights,
            "oversample" => PlanKind::Oversample,
            "undersample" => PlanKind::Undersample,
            "smote" => PlanKind::Smote,
            "cluster" => PlanKind::Cluster,
            other => return Err(Error::InvalidConfig(format!("unknown resampling method {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanSource {
    Original(usize),
    Duplicate(usize),
    Synthetic { base: usize, neighbor: Option<usize>, lambda: f64, features: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub class: usize,
    /// Within-class cluster id, for cluster plans.
    pub cluster: Option<usize>,
    pub source: PlanSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResamplePlan {
    pub kind: PlanKind,
    /// Set for weight plans only.
    pub class_weights: Option<Vec<f64>>,
    /// The complete resampled set, for sample-producing kinds.
    pub entries: Vec<PlanEntry>,
    pub notes: Vec<String>,
}

impl ResamplePlan {
    pub fn weights(class_weights: Vec<f64>) -> Self {
        Self { kind: PlanKind::Weights, class_weights: Some(class_weights), entries: Vec::new(), notes: Vec::new() }
    }

    pub fn class_totals(&self, classes: usize) -> Vec<usize> {
        let mut t = vec![0; classes];
        for e in &self.entries {
            t[e.class] += 1;
        }
        t
    }

    /// Totals per cluster id within one class.
    pub fn cluster_totals(&self, class: usize) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.class == class) {
            if let Some(c) = e.cluster {
                *m.entry(c).or_insert(0) += 1;
            }
        }
        m
    }

    pub fn duplicate_count(&self) -> usize {
        self.entries.iter().filter(|e| matches!(e.source, PlanSource::Duplicate(_))).count()
    }

    pub fn synthetic_count(&self) -> usize {
        self.entries.iter().filter(|e| matches!(e.source, PlanSource::Synthetic { .. })).count()
    }

    /// Materialize the resampled feature rows and labels.
    pub fn apply<P: AsRef<[f64]>>(&self, features: &[P]) -> (Vec<Vec<f64>>, Vec<usize>) {
        self.entries
            .iter()
            .map(|e| {
                let f = match &e.source {
                    PlanSource::Original(i) | PlanSource::Duplicate(i) => features[*i].as_ref().to_vec(),
                    PlanSource::Synthetic { features, .. } => features.clone(),
                };
                (f, e.class)
            })
            .unzip()
    }

    /// Audit table as CSV text.
    pub fn to_table(&self, ids: &[String], vocabulary: &ClassVocabulary) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if let Some(weights) = &self.class_weights {
            w.write_record(["kind", "class", "weight"])?;
            for (c, wc) in weights.iter().enumerate() {
                w.write_record([self.kind.to_string(), vocabulary.label(c).to_string(), format_float(*wc)])?;
            }
        } else {
            let dim = self
                .entries
                .iter()
                .find_map(|e| match &e.source {
                    PlanSource::Synthetic { features, .. } => Some(features.len()),
                    _ => None,
                })
                .unwrap_or(0);
            let mut header: Vec<String> =
                ["kind", "class", "cluster", "origin", "source_id", "neighbor_id", "lambda"].map(String::from).to_vec();
            header.extend((0..dim).map(|k| format!("x{k}")));
            w.write_record(&header)?;
            for e in &self.entries {
                let cluster = e.cluster.map(|c| c.to_string()).unwrap_or_default();
                let mut rec = vec![self.kind.to_string(), vocabulary.label(e.class).to_string(), cluster];
                match &e.source {
                    PlanSource::Original(i) => {
                        rec.extend(["original".into(), ids[*i].clone(), String::new(), String::new()]);
                        rec.extend(std::iter::repeat_n(String::new(), dim));
                    }
                    PlanSource::Duplicate(i) => {
                        rec.extend(["duplicate".into(), ids[*i].clone(), String::new(), String::new()]);
                        rec.extend(std::iter::repeat_n(String::new(), dim));
                    }
                    PlanSource::Synthetic { base, neighbor, lambda, features } => {
                        rec.extend([
                            "synthetic".into(),
                            ids[*base].clone(),
                            neighbor.map(|n| ids[n].clone()).unwrap_or_default(),
                            format_float(*lambda),
                        ]);
                        rec.extend(features.iter().copied().map(format_float));
                    }
                }
                w.write_record(&rec)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn members_by_class(labels: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        m[y].push(i);
    }
    m
}

/// Duplicates that bring `members` up to `target`: whole rounds in order,
/// then a seeded selection for the remainder.
fn grow(members: &[usize], target: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = members.len();
    if n == 0 || target <= n {
        return Vec::new();
    }
    let extra = target - n;
    let mut out = Vec::with_capacity(extra);
    for _ in 0..extra / n {
        out.extend_from_slice(members);
    }
    let mut shuffled = members.to_vec();
    shuffled.shuffle(rng);
    out.extend_from_slice(&shuffled[..extra % n]);
    out
}

fn originals(labels: &[usize]) -> Vec<PlanEntry> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| PlanEntry { class: y, cluster: None, source: PlanSource::Original(i) })
        .collect()
}

/// Duplicate every non-empty class up to `n_max`.
pub fn random_oversample(labels: &[usize], classes: usize, seed: u64) -> ResamplePlan {
    let n_max = ClassCounts::from_labels(labels, classes).max();
    let mut entries = originals(labels);
    for (c, members) in members_by_class(labels, classes).iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed(seed, c));
        for i in grow(members, n_max, &mut rng) {
            entries.push(PlanEntry { class: c, cluster: None, source: PlanSource::Duplicate(i) });
        }
    }
    ResamplePlan { kind: PlanKind::Oversample, class_weights: None, entries, notes: Vec::new() }
}

/// Keep a seeded subset of every class, sized to the smallest non-empty class.
pub fn random_undersample(labels: &[usize], classes: usize, seed: u64) -> Result<ResamplePlan> {
    let n_min = ClassCounts::from_labels(labels, classes).min_present().ok_or(Error::AllEmpty)?;
    let mut keep = Vec::new();
    for (c, members) in members_by_class(labels, classes).iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed(seed, c));
        let mut m = members.clone();
        m.shuffle(&mut rng);
        keep.extend_from_slice(&m[..m.len().min(n_min)]);
    }
    keep.sort_unstable();
    let entries = keep
        .into_iter()
        .map(|i| PlanEntry { class: labels[i], cluster: None, source: PlanSource::Original(i) })
        .collect();
    Ok(ResamplePlan { kind: PlanKind::Undersample, class_weights: None, entries, notes: Vec::new() })
}

/// SMOTE every non-empty class up to `n_max`, in feature space.
pub fn smote_oversample<P: AsRef<[f64]>>(
    features: &[P],
    labels: &[usize],
    classes: usize,
    k: usize,
    seed: u64,
) -> Result<ResamplePlan> {
    let counts = ClassCounts::from_labels(labels, classes);
    if counts.max() == 0 {
        return Err(Error::AllEmpty);
    }
    let mut entries = originals(labels);
    let mut notes = Vec::new();
    for (c, members) in members_by_class(labels, classes).iter().enumerate() {
        let need = counts.max() - members.len();
        if members.is_empty() || need == 0 {
            continue;
        }
        let pts: Vec<&[f64]> = members.iter().map(|&i| features[i].as_ref()).collect();
        let out = smote(&pts, k, need, class_seed(seed, c));
        if let Some(w) = out.warning {
            notes.push(format!("class {c}: {w}"));
        }
        for p in out.points {
            entries.push(PlanEntry {
                class: c,
                cluster: None,
                source: PlanSource::Synthetic {
                    base: members[p.base],
                    neighbor: p.neighbor.map(|n| members[n]),
                    lambda: p.lambda,
                    features: p.features,
                },
            });
        }
    }
    Ok(ResamplePlan { kind: PlanKind::Smote, class_weights: None, entries, notes })
}

/// Cluster each class with k-means, then duplicate so that every cluster in
/// a class has the same total and every class has the same total.
///
/// The common class total is `max_c k_c · M_c`, where `k_c` is the number of
/// non-empty clusters in class `c` and `M_c` its largest cluster; this equals
/// `n_max` whenever the largest class needs no within-class balancing. When
/// `total / k_c` leaves a remainder, the extra duplicates go to the largest
/// original clusters first (ties by cluster id).
pub fn cluster_oversample<P: AsRef<[f64]>>(
    features: &[P],
    labels: &[usize],
    classes: usize,
    k_per_class: usize,
    seed: u64,
) -> Result<ResamplePlan> {
    if k_per_class == 0 {
        return Err(Error::InvalidConfig("clusters per class must be at least 1".into()));
    }
    let by_class = members_by_class(labels, classes);
    if by_class.iter().all(Vec::is_empty) {
        return Err(Error::AllEmpty);
    }
    let mut notes = Vec::new();
    // per class: clusters as member lists, largest first
    let mut clusters: Vec<Vec<Vec<usize>>> = vec![Vec::new(); classes];
    for (c, members) in by_class.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let pts: Vec<&[f64]> = members.iter().map(|&i| features[i].as_ref()).collect();
        let km = kmeans(&pts, k_per_class.min(members.len()), class_seed(seed, c));
        if let Some(asked) = km.clamped_from {
            notes.push(format!("class {c}: k clamped from {asked} to {} distinct points", km.centroids.len()));
        } else if k_per_class > members.len() {
            notes.push(format!("class {c}: k clamped from {k_per_class} to class size {}", members.len()));
        }
        let mut groups = vec![Vec::new(); km.centroids.len()];
        for (local, &a) in km.assignments.iter().enumerate() {
            groups[a].push(members[local]);
        }
        groups.retain(|g| !g.is_empty());
        groups.sort_by_key(|g| std::cmp::Reverse(g.len()));
        clusters[c] = groups;
    }

    let target = clusters
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| g.len() * g[0].len())
        .max()
        .expect("at least one non-empty class");

    let mut entries = Vec::new();
    for (c, groups) in clusters.iter().enumerate() {
        if groups.is_empty() {
            continue;
        }
        let k = groups.len();
        let (base, rem) = (target / k, target % k);
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed(seed, c));
        for (j, members) in groups.iter().enumerate() {
            let cluster_target = base + usize::from(j < rem);
            for &i in members {
                entries.push(PlanEntry { class: c, cluster: Some(j), source: PlanSource::Original(i) });
            }
            for i in grow(members, cluster_target, &mut rng) {
                entries.push(PlanEntry { class: c, cluster: Some(j), source: PlanSource::Duplicate(i) });
            }
        }
    }
    Ok(ResamplePlan { kind: PlanKind::Cluster, class_weights: None, entries, notes })
}
