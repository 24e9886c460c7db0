//! Observations, the three-level label hierarchy, the class vocabulary and
//! probability vectors.
//!
//! Everything here is immutable once validated. A [`Dataset`] is only ever
//! produced by [`validate_dataset`] (or its vocabulary-pinned sibling), so
//! holding one is proof that every row passed the range, uniqueness and
//! tree checks.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result, Violation};

/// Tolerance on the sum of a probability vector read from outside.
pub const INGEST_SUM_TOL: f64 = 1e-6;

/// Family (level 1), genus-like level 2, species (level 3).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelHierarchy {
    levels: [BTreeSet<String>; 3],
    species_parent: BTreeMap<String, String>,
    level2_parent: BTreeMap<String, String>,
}

impl LabelHierarchy {
    pub fn species(&self) -> impl Iterator<Item = &str> {
        self.levels[2].iter().map(String::as_str)
    }

    pub fn level(&self, level: usize) -> &BTreeSet<String> {
        &self.levels[level - 1]
    }

    pub fn contains_species(&self, label: &str) -> bool {
        self.levels[2].contains(label)
    }

    /// Level-2 parent of a species.
    pub fn parent_of_species(&self, species: &str) -> Option<&str> {
        self.species_parent.get(species).map(String::as_str)
    }

    /// Level-1 parent of a level-2 label.
    pub fn parent_of_level2(&self, label: &str) -> Option<&str> {
        self.level2_parent.get(label).map(String::as_str)
    }

    /// `(level-2, level-1)` ancestors of a species.
    pub fn lineage(&self, species: &str) -> Option<(&str, &str)> {
        let l2 = self.parent_of_species(species)?;
        let l1 = self.parent_of_level2(l2)?;
        Some((l2, l1))
    }

    /// Build from `(l1, l2, l3)` triples; any label with two parents, or a
    /// label appearing on two levels, is reported.
    pub fn from_triples<'a, I>(triples: I) -> std::result::Result<Self, Vec<Violation>>
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut species_parents: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut level2_parents: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut levels: [BTreeSet<String>; 3] = Default::default();
        for (l1, l2, l3) in triples {
            levels[0].insert(l1.to_string());
            levels[1].insert(l2.to_string());
            levels[2].insert(l3.to_string());
            species_parents.entry(l3.to_string()).or_default().insert(l2.to_string());
            level2_parents.entry(l2.to_string()).or_default().insert(l1.to_string());
        }

        let mut violations = Vec::new();
        for (child, parents) in species_parents.iter().chain(level2_parents.iter()) {
            if parents.len() > 1 {
                violations.push(Violation::BrokenHierarchy {
                    label: child.clone(),
                    detail: format!(
                        "has {} parents: {}",
                        parents.len(),
                        parents.iter().cloned().collect::<Vec<_>>().join(", ")
                    ),
                });
            }
        }
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            for label in levels[i].intersection(&levels[j]) {
                violations.push(Violation::BrokenHierarchy {
                    label: label.clone(),
                    detail: format!("used on both level {} and level {}", i + 1, j + 1),
                });
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }

        let first = |m: BTreeMap<String, BTreeSet<String>>| {
            m.into_iter().map(|(k, v)| (k, v.into_iter().next().expect("non-empty parent set"))).collect()
        };
        Ok(Self { levels, species_parent: first(species_parents), level2_parent: first(level2_parents) })
    }
}

/// Ordered list of species labels with a dense `0..C` index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassVocabulary {
    classes: Vec<String>,
    index: HashMap<String, usize>,
}

impl ClassVocabulary {
    /// Sorted, deduplicated vocabulary.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        Self::build(set.into_iter().collect())
    }

    /// Keep the given order (as persisted in a file); duplicates and empty
    /// labels are rejected.
    pub fn from_ordered(classes: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &classes {
            if c.is_empty() {
                return Err(Error::HeaderMismatch("empty class label".into()));
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::HeaderMismatch(format!("duplicate class label {c:?}")));
            }
        }
        Ok(Self::build(classes))
    }

    fn build(classes: Vec<String>) -> Self {
        let index = classes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Self { classes, index }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.classes[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.classes
    }

    /// Error unless `other` has exactly the same labels in the same order.
    pub fn ensure_same(&self, other: &ClassVocabulary, what: &str) -> Result<()> {
        if self.classes == other.classes {
            Ok(())
        } else {
            Err(Error::VocabularyMismatch(format!(
                "{what}: expected {} classes [{}], found {} classes [{}]",
                self.len(),
                abbreviate(&self.classes),
                other.len(),
                abbreviate(&other.classes)
            )))
        }
    }
}

fn abbreviate(labels: &[String]) -> String {
    if labels.len() <= 6 {
        labels.join(", ")
    } else {
        format!("{}, ... , {}", labels[..3].join(", "), labels[labels.len() - 2..].join(", "))
    }
}

/// A normalized distribution over the class vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Accept an externally supplied vector: entries finite and non-negative,
    /// sum within [`INGEST_SUM_TOL`] of one. The stored copy is renormalized.
    pub fn from_ingest(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidProbability("empty vector".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidProbability(format!("entry {v} is negative or not finite")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > INGEST_SUM_TOL {
            return Err(Error::InvalidProbability(format!("entries sum to {sum}")));
        }
        Ok(Self(values.into_iter().map(|v| v / sum).collect()))
    }

    /// Normalize non-negative finite mass. Panics if the total is not positive.
    pub fn normalize(mut values: Vec<f64>) -> Self {
        let sum: f64 = values.iter().sum();
        assert!(sum > 0.0 && sum.is_finite(), "cannot normalize mass {sum}");
        for v in &mut values {
            *v /= sum;
        }
        Self(values)
    }

    pub fn uniform(classes: usize) -> Self {
        Self(vec![1.0 / classes as f64; classes])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// One sighting.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub obs_id: String,
    pub latitude: f64,
    /// Always in `[-180, 180)`.
    pub longitude: f64,
    pub date: NaiveDate,
    pub species: String,
}

impl Observation {
    pub fn day_of_year0(&self) -> u32 {
        self.date.ordinal0()
    }
}

/// An unvalidated row as read from an observation CSV.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RawRow {
    pub obs_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub date: String,
    pub label_l1: String,
    pub label_l2: String,
    pub label_l3: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    hierarchy: LabelHierarchy,
    vocabulary: ClassVocabulary,
    observations: Vec<Observation>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn hierarchy(&self) -> &LabelHierarchy {
        &self.hierarchy
    }

    pub fn vocabulary(&self) -> &ClassVocabulary {
        &self.vocabulary
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Class index of every observation, aligned with [`Self::observations`].
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Rows that re-validate to this exact dataset.
    pub fn to_rows(&self) -> Vec<RawRow> {
        self.observations
            .iter()
            .map(|o| {
                let (l2, l1) = self.hierarchy.lineage(&o.species).expect("validated lineage");
                RawRow {
                    obs_id: o.obs_id.clone(),
                    latitude: o.latitude,
                    longitude: o.longitude,
                    date: o.date.format("%Y-%m-%d").to_string(),
                    label_l1: l1.to_string(),
                    label_l2: l2.to_string(),
                    label_l3: o.species.clone(),
                }
            })
            .collect()
    }

    /// Subset by position, keeping hierarchy and vocabulary.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            hierarchy: self.hierarchy.clone(),
            vocabulary: self.vocabulary.clone(),
            observations: indices.iter().map(|&i| self.observations[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Validate rows, deriving the hierarchy and a sorted vocabulary from them.
pub fn validate_dataset(rows: &[RawRow]) -> Result<Dataset> {
    validate_inner(rows, None)
}

/// Validate rows against a fixed vocabulary (e.g. a test split that must
/// line up with a trained model). Species outside it are `UnknownLabel`.
pub fn validate_dataset_with(rows: &[RawRow], vocabulary: &ClassVocabulary) -> Result<Dataset> {
    validate_inner(rows, Some(vocabulary))
}

fn validate_inner(rows: &[RawRow], fixed: Option<&ClassVocabulary>) -> Result<Dataset> {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    let mut observations = Vec::with_capacity(rows.len());

    for row in rows {
        let mut ok = true;
        if !seen.insert(row.obs_id.as_str()) {
            violations.push(Violation::DuplicateId { obs_id: row.obs_id.clone() });
            ok = false;
        }
        if !(row.latitude.is_finite() && (-90.0..=90.0).contains(&row.latitude)) {
            violations.push(Violation::CoordinateOutOfRange {
                obs_id: row.obs_id.clone(),
                field: "latitude",
                value: row.latitude,
            });
            ok = false;
        }
        if !(row.longitude.is_finite() && (-180.0..=180.0).contains(&row.longitude)) {
            violations.push(Violation::CoordinateOutOfRange {
                obs_id: row.obs_id.clone(),
                field: "longitude",
                value: row.longitude,
            });
            ok = false;
        }
        let date = NaiveDate::parse_from_str(row.date.trim(), "%Y-%m-%d").ok();
        if date.is_none() {
            violations.push(Violation::InvalidDate { obs_id: row.obs_id.clone(), value: row.date.clone() });
            ok = false;
        }
        for label in [&row.label_l1, &row.label_l2, &row.label_l3] {
            if label.trim().is_empty() {
                violations.push(Violation::UnknownLabel { obs_id: row.obs_id.clone(), label: label.clone() });
                ok = false;
            }
        }
        if let Some(vocab) = fixed {
            if !row.label_l3.is_empty() && vocab.index_of(&row.label_l3).is_none() {
                violations.push(Violation::UnknownLabel { obs_id: row.obs_id.clone(), label: row.label_l3.clone() });
                ok = false;
            }
        }
        if ok {
            let longitude = if row.longitude == 180.0 { -180.0 } else { row.longitude };
            observations.push(Observation {
                obs_id: row.obs_id.clone(),
                latitude: row.latitude,
                longitude,
                date: date.expect("checked above"),
                species: row.label_l3.clone(),
            });
        }
    }

    let hierarchy = LabelHierarchy::from_triples(
        rows.iter()
            .filter(|r| ![&r.label_l1, &r.label_l2, &r.label_l3].iter().any(|l| l.trim().is_empty()))
            .map(|r| (r.label_l1.as_str(), r.label_l2.as_str(), r.label_l3.as_str())),
    );
    let hierarchy = match hierarchy {
        Ok(h) => h,
        Err(mut v) => {
            violations.append(&mut v);
            LabelHierarchy::default()
        }
    };

    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }

    let vocabulary = match fixed {
        Some(v) => v.clone(),
        None => ClassVocabulary::from_labels(hierarchy.species()),
    };
    let labels = observations
        .iter()
        .map(|o| vocabulary.index_of(&o.species).expect("species checked against vocabulary"))
        .collect();
    Ok(Dataset { hierarchy, vocabulary, observations, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, lat: f64, lon: f64, date: &str, l1: &str, l2: &str, l3: &str) -> RawRow {
        RawRow {
            obs_id: id.into(),
            latitude: lat,
            longitude: lon,
            date: date.into(),
            label_l1: l1.into(),
            label_l2: l2.into(),
            label_l3: l3.into(),
        }
    }

    fn fixture() -> Vec<RawRow> {
        vec![
            row("a", 45.5, -73.6, "2020-06-01", "Nymphalidae", "Danaus", "plexippus"),
            row("b", 10.0, 20.0, "2019-02-28", "Nymphalidae", "Danaus", "gilippus"),
            row("c", -3.0, 180.0, "2016-12-31", "Papilionidae", "Papilio", "glaucus"),
        ]
    }

    #[test]
    fn well_formed_three_rows() {
        let ds = validate_dataset(&fixture()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.vocabulary().len(), 3);
        assert_eq!(ds.vocabulary().labels(), ["gilippus", "glaucus", "plexippus"]);
        assert_eq!(ds.labels(), &[2, 0, 1]);
        assert_eq!(ds.hierarchy().lineage("glaucus"), Some(("Papilio", "Papilionidae")));
    }

    #[test]
    fn longitude_180_wraps_to_minus_180() {
        let ds = validate_dataset(&fixture()).unwrap();
        assert_eq!(ds.observations()[2].longitude, -180.0);
    }

    #[test]
    fn latitude_out_of_range_names_the_row() {
        let mut rows = fixture();
        rows[1].latitude = 91.0;
        match validate_dataset(&rows) {
            Err(Error::Validation(v)) => assert_eq!(
                v,
                vec![Violation::CoordinateOutOfRange { obs_id: "b".into(), field: "latitude", value: 91.0 }]
            ),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn species_under_two_parents_is_broken() {
        let mut rows = fixture();
        rows.push(row("d", 0.0, 0.0, "2020-01-01", "Nymphalidae", "Limenitis", "plexippus"));
        let err = validate_dataset(&rows).unwrap_err();
        let Error::Validation(v) = err else { panic!() };
        assert!(matches!(&v[..], [Violation::BrokenHierarchy { label, .. }] if label == "plexippus"));
    }

    #[test]
    fn label_on_two_levels_is_broken() {
        let rows = vec![row("a", 0.0, 0.0, "2020-01-01", "X", "Y", "X")];
        assert!(matches!(
            validate_dataset(&rows),
            Err(Error::Validation(v)) if matches!(&v[..], [Violation::BrokenHierarchy { .. }])
        ));
    }

    #[test]
    fn every_violation_is_reported() {
        let mut rows = fixture();
        rows.push(rows[0].clone());
        rows[1].date = "2019-02-30".into();
        rows[2].longitude = 180.5;
        let Err(Error::Validation(v)) = validate_dataset(&rows) else { panic!() };
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn fixed_vocabulary_rejects_unknown_species() {
        let vocab = ClassVocabulary::from_labels(["gilippus", "plexippus"]);
        let Err(Error::Validation(v)) = validate_dataset_with(&fixture(), &vocab) else { panic!() };
        assert_eq!(v, vec![Violation::UnknownLabel { obs_id: "c".into(), label: "glaucus".into() }]);
    }

    #[test]
    fn validation_is_idempotent() {
        let ds = validate_dataset(&fixture()).unwrap();
        let again = validate_dataset(&ds.to_rows()).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn prob_vector_ingest() {
        assert!(ProbVector::from_ingest(vec![0.5, 0.5000005]).is_ok());
        assert!(ProbVector::from_ingest(vec![0.5, 0.51]).is_err());
        assert!(ProbVector::from_ingest(vec![1.5, -0.5]).is_err());
        let p = ProbVector::from_ingest(vec![0.25, 0.75000001]).unwrap();
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vocabulary_from_ordered_rejects_duplicates() {
        assert!(ClassVocabulary::from_ordered(vec!["b".into(), "a".into()]).is_ok());
        assert!(ClassVocabulary::from_ordered(vec!["a".into(), "a".into()]).is_err());
    }
}
