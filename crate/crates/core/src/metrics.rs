//! Top-k accuracy, micro- and macro-averaged.
//!
//! Micro: correct observations over all observations. Macro: unweighted
//! mean of per-class accuracy over classes that have at least one test
//! observation. Empty classes are excluded from the macro divisor and
//! listed in the report.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::fusion::{in_top_k, ProbMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Averaging {
    Micro,
    Macro,
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Averaging::Micro => "micro",
            Averaging::Macro => "macro",
        })
    }
}

impl FromStr for Averaging {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "micro" => Ok(Averaging::Micro),
            "macro" => Ok(Averaging::Macro),
            other => Err(Error::InvalidConfig(format!("unknown averaging {other:?}"))),
        }
    }
}

/// Accuracy from per-observation hit flags. Returns 0 when nothing is scored.
pub fn accuracy_from_hits(hits: &[bool], labels: &[usize], classes: usize, averaging: Averaging) -> f64 {
    match averaging {
        Averaging::Micro => {
            if hits.is_empty() {
                return 0.0;
            }
            hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64
        }
        Averaging::Macro => {
            let mut n = vec![0usize; classes];
            let mut correct = vec![0usize; classes];
            for (&h, &y) in hits.iter().zip(labels) {
                n[y] += 1;
                correct[y] += usize::from(h);
            }
            let present: Vec<(usize, usize)> =
                n.iter().zip(&correct).filter(|(n, _)| **n > 0).map(|(n, c)| (*n, *c)).collect();
            if present.is_empty() {
                return 0.0;
            }
            // equal class sizes: the mean of ratios is the pooled ratio, computed
            // in one division so it matches micro bit for bit
            if present.iter().all(|(m, _)| *m == present[0].0) {
                let hits: usize = present.iter().map(|(_, c)| c).sum();
                return hits as f64 / (present[0].0 * present.len()) as f64;
            }
            present.iter().map(|(n, c)| *c as f64 / *n as f64).sum::<f64>() / present.len() as f64
        }
    }
}

/// Hit flags for raw probability rows.
pub fn topk_hits<R: AsRef<[f64]>>(rows: &[R], labels: &[usize], k: usize) -> Result<Vec<bool>> {
    rows.iter()
        .zip(labels)
        .map(|(r, &y)| {
            let r = r.as_ref();
            if k == 0 || k > r.len() {
                return Err(Error::KOutOfRange { k, classes: r.len() });
            }
            Ok(in_top_k(r, y, k))
        })
        .collect()
}

/// Probability rows aligned with the truth observations.
fn aligned<'a>(probs: &'a ProbMatrix, truth: &Dataset) -> Result<Vec<&'a [f64]>> {
    if probs.vocabulary().labels() != truth.vocabulary().labels() {
        return Err(Error::HeaderMismatch(format!(
            "probability header has {} classes, truth vocabulary has {}, or their order differs",
            probs.vocabulary().len(),
            truth.vocabulary().len()
        )));
    }
    truth
        .observations()
        .iter()
        .map(|o| probs.get(&o.obs_id).map(|p| p.as_slice()).ok_or_else(|| Error::MissingObservation(o.obs_id.clone())))
        .collect()
}

pub fn topk_accuracy(probs: &ProbMatrix, truth: &Dataset, k: usize, averaging: Averaging) -> Result<f64> {
    let rows = aligned(probs, truth)?;
    let hits = topk_hits(&rows, truth.labels(), k)?;
    Ok(accuracy_from_hits(&hits, truth.labels(), truth.vocabulary().len(), averaging))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow {
    pub class: String,
    pub level2: Option<String>,
    pub level1: Option<String>,
    pub n: usize,
    /// Correct count per requested k, aligned with `EvalReport::ks`.
    pub correct: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupRow {
    pub label: String,
    pub n: usize,
    pub correct: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub averagings: Vec<Averaging>,
    /// `(k, averaging, accuracy)` in request order, k-major.
    pub cells: Vec<(usize, Averaging, f64)>,
    pub per_class: Vec<ClassRow>,
    pub level2: Vec<GroupRow>,
    pub level1: Vec<GroupRow>,
    pub evaluated: usize,
    pub excluded_from_macro: Vec<String>,
}

impl EvalReport {
    pub fn get(&self, k: usize, averaging: Averaging) -> Option<f64> {
        self.cells.iter().find(|(kk, a, _)| *kk == k && *a == averaging).map(|c| c.2)
    }

    /// Structured key/value text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let classes = self.per_class.len();
        writeln!(s, "evaluated_observations = {}", self.evaluated).unwrap();
        writeln!(s, "classes = {classes}").unwrap();
        writeln!(s, "macro_classes = {}", classes - self.excluded_from_macro.len()).unwrap();
        writeln!(s, "excluded_from_macro = [{}]", quoted(&self.excluded_from_macro)).unwrap();
        s.push_str("\n[accuracy]\n");
        for (k, a, v) in &self.cells {
            writeln!(s, "top{k}_{a} = {v}").unwrap();
        }
        for (title, rows) in [("level2", &self.level2), ("level1", &self.level1)] {
            writeln!(s, "\n[{title}]").unwrap();
            for g in rows {
                let cells: Vec<String> =
                    self.ks.iter().zip(&g.correct).map(|(k, c)| format!("top{k} = {}", ratio(*c, g.n))).collect();
                writeln!(s, "{:?} = {{ n = {}, {} }}", g.label, g.n, cells.join(", ")).unwrap();
            }
        }
        s
    }

    /// One CSV row per class.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["class".to_string(), "level2".into(), "level1".into(), "n".into()];
        for k in &self.ks {
            header.push(format!("top{k}_correct"));
            header.push(format!("top{k}_accuracy"));
        }
        w.write_record(&header)?;
        for r in &self.per_class {
            let mut rec = vec![
                r.class.clone(),
                r.level2.clone().unwrap_or_default(),
                r.level1.clone().unwrap_or_default(),
                r.n.to_string(),
            ];
            for c in &r.correct {
                rec.push(c.to_string());
                rec.push(if r.n == 0 { String::new() } else { ratio(*c, r.n).to_string() });
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn ratio(c: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        c as f64 / n as f64
    }
}

fn quoted(v: &[String]) -> String {
    v.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(", ")
}

pub fn eval_report(probs: &ProbMatrix, truth: &Dataset, ks: &[usize], averagings: &[Averaging]) -> Result<EvalReport> {
    let rows = aligned(probs, truth)?;
    let labels = truth.labels();
    let vocab = truth.vocabulary();
    let c = vocab.len();
    let hits: Vec<Vec<bool>> = ks.iter().map(|&k| topk_hits(&rows, labels, k)).collect::<Result<_>>()?;
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > c) {
        return Err(Error::KOutOfRange { k, classes: c });
    }

    let mut cells = Vec::new();
    for (k, h) in ks.iter().zip(&hits) {
        for &a in averagings {
            cells.push((*k, a, accuracy_from_hits(h, labels, c, a)));
        }
    }

    let hierarchy = truth.hierarchy();
    let mut per_class: Vec<ClassRow> = (0..c)
        .map(|i| {
            let label = vocab.label(i);
            let lineage = hierarchy.lineage(label);
            ClassRow {
                class: label.to_string(),
                level2: lineage.map(|l| l.0.to_string()),
                level1: lineage.map(|l| l.1.to_string()),
                n: 0,
                correct: vec![0; ks.len()],
            }
        })
        .collect();
    for (i, &y) in labels.iter().enumerate() {
        per_class[y].n += 1;
        for (j, h) in hits.iter().enumerate() {
            per_class[y].correct[j] += usize::from(h[i]);
        }
    }

    let group = |key: fn(&ClassRow) -> Option<&String>| -> Vec<GroupRow> {
        let mut m: BTreeMap<&str, GroupRow> = BTreeMap::new();
        for r in per_class.iter().filter(|r| r.n > 0) {
            let Some(label) = key(r) else { continue };
            let g = m.entry(label.as_str()).or_insert_with(|| GroupRow {
                label: label.clone(),
                n: 0,
                correct: vec![0; ks.len()],
            });
            g.n += r.n;
            for (a, b) in g.correct.iter_mut().zip(&r.correct) {
                *a += b;
            }
        }
        m.into_values().collect()
    };
    let level2 = group(|r| r.level2.as_ref());
    let level1 = group(|r| r.level1.as_ref());
    let excluded_from_macro = per_class.iter().filter(|r| r.n == 0).map(|r| r.class.clone()).collect();

    Ok(EvalReport {
        ks: ks.to_vec(),
        averagings: averagings.to_vec(),
        cells,
        per_class,
        level2,
        level1,
        evaluated: labels.len(),
        excluded_from_macro,
    })
}
