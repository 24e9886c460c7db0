//! Mini-batch SGD with classical momentum and per-epoch learning-rate decay.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use super::{neg_log_softmax, GeoNet};
use crate::domain::Dataset;
use crate::encode::EncodedFeatures;
use crate::error::{Error, Result};
use crate::fusion::in_top_k;
use crate::imbalance::{crl_loss_and_gradients, hard_mine_triplets, mixup, LabeledBatch, WeightedDraws};
use crate::metrics::{accuracy_from_hits, Averaging};

/// Encoded samples with class indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainSet {
    pub features: Vec<EncodedFeatures>,
    pub labels: Vec<usize>,
}

impl TrainSet {
    pub fn from_dataset(ds: &Dataset, net: &GeoNet) -> Self {
        Self {
            features: ds.observations().iter().map(|o| net.convention().encode(o)).collect(),
            labels: ds.labels().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// How each epoch's visiting order is drawn.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SampleOrder {
    /// A fresh permutation of all samples per epoch.
    #[default]
    Shuffle,
    /// `len` i.i.d. draws per epoch, probability proportional to the weight
    /// of each sample.
    Weighted(Vec<f64>),
}

/// Class rectification loss settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CrlSettings {
    /// Per-class mixing weight between cross-entropy and triplet terms.
    pub alpha: Vec<f64>,
    pub margin: f64,
    /// Classes whose samples may anchor a triplet.
    pub minority: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainOptions {
    /// Per-class loss weights.
    pub class_weights: Option<Vec<f64>>,
    pub order: SampleOrder,
    pub crl: Option<CrlSettings>,
    /// Beta(α, α) concentration for MixUp on encoded features.
    pub mixup_alpha: Option<f64>,
    pub sampler_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub steps: usize,
    pub learning_rate: f64,
    /// Mean unweighted cross-entropy over the training set after the epoch.
    pub train_loss: f64,
    pub train_top1: f64,
    pub val_top1_micro: Option<f64>,
    pub val_top1_macro: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// One CSV row per epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,steps,learning_rate,train_loss,train_top1,val_top1_micro,val_top1_macro\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.epoch,
                e.steps,
                e.learning_rate,
                e.train_loss,
                e.train_top1,
                opt(e.val_top1_micro),
                opt(e.val_top1_macro)
            ));
        }
        out
    }
}

/// Train on validated datasets, which must share the network's vocabulary.
pub fn train(
    net: GeoNet,
    train: &Dataset,
    val: Option<&Dataset>,
    opts: &TrainOptions,
) -> Result<(GeoNet, TrainHistory)> {
    net.vocabulary().ensure_same(train.vocabulary(), "training set")?;
    if let Some(v) = val {
        net.vocabulary().ensure_same(v.vocabulary(), "validation set")?;
    }
    let data = TrainSet::from_dataset(train, &net);
    let val = val.map(|v| TrainSet::from_dataset(v, &net));
    train_samples(net, &data, val.as_ref(), opts)
}

fn evaluate(net: &GeoNet, set: &TrainSet) -> (f64, Vec<bool>) {
    let mut loss = 0.0;
    let mut hits = Vec::with_capacity(set.len());
    for (x, &y) in set.features.iter().zip(&set.labels) {
        let t = net.trace(x);
        loss += neg_log_softmax(&t.logits, y);
        hits.push(in_top_k(&t.probs, y, 1));
    }
    (loss / set.len().max(1) as f64, hits)
}

fn one_hot(y: usize, c: usize) -> Vec<f64> {
    let mut v = vec![0.0; c];
    v[y] = 1.0;
    v
}

/// Train on already-encoded samples (e.g. after SMOTE augmentation).
pub fn train_samples(
    mut net: GeoNet,
    data: &TrainSet,
    val: Option<&TrainSet>,
    opts: &TrainOptions,
) -> Result<(GeoNet, TrainHistory)> {
    let cfg = *net.config();
    cfg.validate()?;
    let c = cfg.classes;
    if data.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    if data.features.len() != data.labels.len() {
        return Err(Error::ShapeMismatch("features and labels differ in length".into()));
    }
    for set in std::iter::once(data).chain(val) {
        if let Some(&y) = set.labels.iter().find(|&&y| y >= c) {
            return Err(Error::VocabularyMismatch(format!("label index {y} outside {c} classes")));
        }
    }
    if let Some(w) = &opts.class_weights {
        if w.len() != c || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig("class weights must be one non-negative value per class".into()));
        }
    }
    if let Some(crl) = &opts.crl {
        if crl.alpha.len() != c || crl.minority.len() != c {
            return Err(Error::InvalidConfig("CRL settings must have one entry per class".into()));
        }
        if crl.alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidConfig("CRL alpha values must lie in [0, 1]".into()));
        }
        if opts.mixup_alpha.is_some() {
            return Err(Error::InvalidConfig("MixUp cannot be combined with CRL".into()));
        }
    }
    let beta = match opts.mixup_alpha {
        Some(a) => Some(Beta::new(a, a).map_err(|e| Error::InvalidConfig(format!("mixup alpha {a}: {e}")))?),
        None => None,
    };
    let draws = match &opts.order {
        SampleOrder::Shuffle => None,
        SampleOrder::Weighted(w) => {
            if w.len() != data.len() {
                return Err(Error::ShapeMismatch(format!("{} sampling weights for {} samples", w.len(), data.len())));
            }
            Some(WeightedDraws::new(w)?)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.sampler_seed);
    let mut velocity = vec![0.0; net.parameter_count()];
    let mut history = TrainHistory::default();
    let mut steps = 0;
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * cfg.lr_decay.powi(epoch as i32);
        match &draws {
            None => order.shuffle(&mut rng),
            Some(d) => order = d.draw(data.len(), &mut rng),
        }
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<EncodedFeatures> = chunk.iter().map(|&i| data.features[i]).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let ws: Option<Vec<f64>> = opts.class_weights.as_ref().map(|cw| ys.iter().map(|&y| cw[y]).collect());

            let grads = if let Some(crl) = &opts.crl {
                let traces: Vec<_> = xs.iter().map(|x| net.trace(x)).collect();
                let logits: Vec<Vec<f64>> = traces.iter().map(|t| t.logits.clone()).collect();
                let emb: Vec<Vec<f64>> = traces.iter().map(|t| t.embedding().to_vec()).collect();
                let triplets = hard_mine_triplets(&emb, &ys, &crl.minority);
                let (_, dlogits, demb) = crl_loss_and_gradients(&logits, &emb, &ys, &triplets, &crl.alpha, crl.margin);
                let mut g = vec![0.0; net.parameter_count()];
                for ((t, dl), de) in traces.iter().zip(&dlogits).zip(&demb) {
                    net.backward(t, dl, Some(de), &mut g);
                }
                g
            } else if let Some(beta) = &beta {
                let lambda = beta.sample(&mut rng);
                let mut partner: Vec<usize> = (0..xs.len()).collect();
                partner.shuffle(&mut rng);
                let a = LabeledBatch {
                    features: xs.iter().map(|x| x.0.to_vec()).collect(),
                    targets: ys.iter().map(|&y| one_hot(y, c)).collect(),
                };
                let b = LabeledBatch {
                    features: partner.iter().map(|&j| a.features[j].clone()).collect(),
                    targets: partner.iter().map(|&j| a.targets[j].clone()).collect(),
                };
                let mixed = mixup(&a, &b, lambda)?;
                let mixed_x: Vec<EncodedFeatures> = mixed
                    .features
                    .iter()
                    .map(|f| EncodedFeatures(f.as_slice().try_into().expect("six features")))
                    .collect();
                let mixed_w: Option<Vec<f64>> =
                    ws.as_ref().map(|w| (0..w.len()).map(|i| lambda * w[i] + (1.0 - lambda) * w[partner[i]]).collect());
                if mixed_w.as_ref().is_some_and(|w| w.iter().sum::<f64>() <= 0.0) {
                    continue;
                }
                net.soft_loss_and_gradients(&mixed_x, &mixed.targets, mixed_w.as_deref()).1
            } else {
                if ws.as_ref().is_some_and(|w| w.iter().sum::<f64>() <= 0.0) {
                    continue;
                }
                super::loss_and_gradients(&net, &xs, &ys, ws.as_deref()).1
            };

            for ((p, v), g) in net.params_mut().iter_mut().zip(&mut velocity).zip(&grads) {
                *v = cfg.momentum * *v - lr * g;
                *p += *v;
            }
            steps += 1;
        }

        let (train_loss, hits) = evaluate(&net, data);
        let train_top1 = accuracy_from_hits(&hits, &data.labels, c, Averaging::Micro);
        let (val_top1_micro, val_top1_macro) = match val {
            Some(v) if !v.is_empty() => {
                let (_, vh) = evaluate(&net, v);
                (
                    Some(accuracy_from_hits(&vh, &v.labels, c, Averaging::Micro)),
                    Some(accuracy_from_hits(&vh, &v.labels, c, Averaging::Macro)),
                )
            }
            _ => (None, None),
        };
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            steps,
            learning_rate: lr,
            train_loss,
            train_top1,
            val_top1_micro,
            val_top1_macro,
        });
    }
    Ok((net, history))
}
