use std::fmt;
use std::str::FromStr;

use crate::domain::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    counts: Vec<usize>,
}

impl ClassCounts {
    pub fn from_labels(labels: &[usize], classes: usize) -> Self {
        let mut counts = vec![0; classes];
        for &y in labels {
            counts[y] += 1;
        }
        Self { counts }
    }

    pub fn from_counts(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn max(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Smallest non-zero count.
    pub fn min_present(&self) -> Option<usize> {
        self.counts.iter().copied().filter(|&n| n > 0).min()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Cumulative fraction of samples over classes in vocabulary order.
    pub fn cumulative_distribution(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        let mut acc = 0;
        self.counts
            .iter()
            .map(|n| {
                acc += n;
                acc as f64 / total
            })
            .collect()
    }
}

pub fn class_counts(dataset: &Dataset) -> ClassCounts {
    ClassCounts::from_labels(dataset.labels(), dataset.vocabulary().len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// `n_max / n_c`
    Inverse,
    /// `1 / ln(e + n_c)`
    InverseLog,
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightKind::Inverse => "inverse",
            WeightKind::InverseLog => "inverse_log",
        })
    }
}

impl FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse" => Ok(WeightKind::Inverse),
            "inverse_log" | "inverse-log" => Ok(WeightKind::InverseLog),
            other => Err(Error::InvalidConfig(format!("unknown weight scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightScheme {
    pub kind: WeightKind,
    pub cap: Option<f64>,
}

impl WeightScheme {
    pub fn new(kind: WeightKind) -> Self {
        Self { kind, cap: None }
    }
}

/// Per-class loss weights. Absent classes get 0; the cap is applied last.
pub fn class_weights(counts: &ClassCounts, scheme: WeightScheme) -> Result<Vec<f64>> {
    let n_max = counts.max();
    if n_max == 0 {
        return Err(Error::AllEmpty);
    }
    if let Some(cap) = scheme.cap {
        if cap.is_nan() || cap <= 0.0 {
            return Err(Error::InvalidConfig(format!("weight cap must be positive, got {cap}")));
        }
    }
    Ok(counts
        .counts()
        .iter()
        .map(|&n| {
            if n == 0 {
                return 0.0;
            }
            let w = match scheme.kind {
                WeightKind::Inverse => n_max as f64 / n as f64,
                WeightKind::InverseLog => 1.0 / (std::f64::consts::E + n as f64).ln(),
            };
            scheme.cap.map_or(w, |c| w.min(c))
        })
        .collect())
}

/// Smallest classes whose combined size stays within `fraction` of the data.
/// Absent classes are never minority (they cannot anchor anything).
pub fn minority_classes(counts: &ClassCounts, fraction: f64) -> Vec<bool> {
    let budget = fraction * counts.total() as f64;
    let mut order: Vec<usize> = (0..counts.classes()).filter(|&c| counts.counts()[c] > 0).collect();
    order.sort_by_key(|&c| (counts.counts()[c], c));
    let mut minority = vec![false; counts.classes()];
    let mut acc = 0usize;
    for c in order {
        acc += counts.counts()[c];
        if acc as f64 > budget {
            break;
        }
        minority[c] = true;
    }
    minority
}
