use crate::error::{Error, Result};

/// Feature rows with soft label rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledBatch {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl LabeledBatch {
    fn shape(&self) -> (usize, Option<usize>, Option<usize>) {
        (self.features.len(), self.features.first().map(Vec::len), self.targets.first().map(Vec::len))
    }

    fn is_rectangular(&self) -> bool {
        let (_, f, t) = self.shape();
        self.features.len() == self.targets.len()
            && self.features.iter().all(|r| Some(r.len()) == f)
            && self.targets.iter().all(|r| Some(r.len()) == t)
    }
}

/// `λ·a + (1 − λ)·b` on both features and labels.
pub fn mixup(a: &LabeledBatch, b: &LabeledBatch, lambda: f64) -> Result<LabeledBatch> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidConfig(format!("mixup lambda {lambda} outside [0, 1]")));
    }
    if !a.is_rectangular() || !b.is_rectangular() || a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("batches {:?} and {:?}", a.shape(), b.shape())));
    }
    let mix = |x: &[Vec<f64>], y: &[Vec<f64>]| -> Vec<Vec<f64>> {
        x.iter().zip(y).map(|(r, s)| r.iter().zip(s).map(|(u, v)| lambda * u + (1.0 - lambda) * v).collect()).collect()
    };
    Ok(LabeledBatch { features: mix(&a.features, &b.features), targets: mix(&a.targets, &b.targets) })
}
