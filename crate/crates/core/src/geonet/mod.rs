//! Residual fully-connected prior network `P(y | x)`.
//!
//! Architecture, nine weight layers in total:
//!
//! ```text
//! h0  = relu(W_in x + b_in)
//! h  <- h + relu(W2 relu(W1 h + b1) + b2)      (four blocks)
//! out = softmax(W_out h + b_out)
//! ```
//!
//! All parameters live in one flat `Vec<f64>` so the optimizer, the
//! finite-difference checks and the checkpoint code can treat them
//! uniformly. [`Layout`] maps named tensors onto ranges of that vector.
//! Matrices are row-major with shape `(out, in)`.

mod checkpoint;
mod train;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ClassVocabulary, Observation, ProbVector};
use crate::encode::{EncodedFeatures, FeatureConvention, FEATURE_DIM};
use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use train::{train, train_samples, CrlSettings, EpochRecord, SampleOrder, TrainHistory, TrainOptions, TrainSet};

/// Fixed by the architecture: one input projection plus two layers per block.
pub const RESIDUAL_BLOCKS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoNetConfig {
    pub input_dim: usize,
    pub hidden_width: usize,
    pub residual_blocks: usize,
    pub classes: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl GeoNetConfig {
    pub fn new(classes: usize) -> Self {
        Self {
            input_dim: FEATURE_DIM,
            hidden_width: 64,
            residual_blocks: RESIDUAL_BLOCKS,
            classes,
            seed: 0,
            learning_rate: 0.05,
            momentum: 0.9,
            lr_decay: 0.98,
            epochs: 30,
            batch_size: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.input_dim != FEATURE_DIM {
            return bad(format!("input_dim must be {FEATURE_DIM}, got {}", self.input_dim));
        }
        if self.residual_blocks != RESIDUAL_BLOCKS {
            return bad(format!("residual_blocks must be {RESIDUAL_BLOCKS}, got {}", self.residual_blocks));
        }
        if self.hidden_width == 0 {
            return bad("hidden_width must be positive".into());
        }
        if self.classes == 0 {
            return bad("classes must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay > 0.0) {
            return bad(format!("lr_decay must be positive, got {}", self.lr_decay));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        Ok(())
    }

    /// Number of fully-connected layers.
    pub fn layer_count(&self) -> usize {
        1 + 2 * self.residual_blocks + 1
    }
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    hidden: usize,
    classes: usize,
    blocks: usize,
}

impl Layout {
    pub fn new(hidden: usize, classes: usize, blocks: usize) -> Self {
        Self { hidden, classes, blocks }
    }

    pub fn input_weight(&self) -> Range<usize> {
        0..self.hidden * FEATURE_DIM
    }

    pub fn input_bias(&self) -> Range<usize> {
        let s = self.hidden * FEATURE_DIM;
        s..s + self.hidden
    }

    fn block_base(&self, block: usize) -> usize {
        let h = self.hidden;
        h * (FEATURE_DIM + 1) + block * 2 * (h * h + h)
    }

    pub fn block_w1(&self, block: usize) -> Range<usize> {
        let s = self.block_base(block);
        s..s + self.hidden * self.hidden
    }

    pub fn block_b1(&self, block: usize) -> Range<usize> {
        let s = self.block_w1(block).end;
        s..s + self.hidden
    }

    pub fn block_w2(&self, block: usize) -> Range<usize> {
        let s = self.block_b1(block).end;
        s..s + self.hidden * self.hidden
    }

    pub fn block_b2(&self, block: usize) -> Range<usize> {
        let s = self.block_w2(block).end;
        s..s + self.hidden
    }

    pub fn output_weight(&self) -> Range<usize> {
        let s = self.block_base(self.blocks);
        s..s + self.classes * self.hidden
    }

    pub fn output_bias(&self) -> Range<usize> {
        let s = self.output_weight().end;
        s..s + self.classes
    }

    pub fn total(&self) -> usize {
        self.output_bias().end
    }

    /// `(weight, bias, fan_in)` for every layer in forward order.
    fn layers(&self) -> Vec<(Range<usize>, Range<usize>, usize)> {
        let mut out = vec![(self.input_weight(), self.input_bias(), FEATURE_DIM)];
        for b in 0..self.blocks {
            out.push((self.block_w1(b), self.block_b1(b), self.hidden));
            out.push((self.block_w2(b), self.block_b2(b), self.hidden));
        }
        out.push((self.output_weight(), self.output_bias(), self.hidden));
        out
    }
}

/// Parameter count as a function of width and class count.
pub fn parameter_count(hidden_width: usize, classes: usize) -> usize {
    Layout::new(hidden_width, classes, RESIDUAL_BLOCKS).total()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoNet {
    config: GeoNetConfig,
    params: Vec<f64>,
    vocabulary: ClassVocabulary,
    convention: FeatureConvention,
}

/// Initialize weights uniformly in `±1/sqrt(fan_in)`, biases at zero.
pub fn init_network(
    config: GeoNetConfig,
    vocabulary: ClassVocabulary,
    convention: FeatureConvention,
) -> Result<GeoNet> {
    config.validate()?;
    if vocabulary.len() != config.classes {
        return Err(Error::VocabularyMismatch(format!(
            "config has {} classes but vocabulary has {}",
            config.classes,
            vocabulary.len()
        )));
    }
    let layout = Layout::new(config.hidden_width, config.classes, config.residual_blocks);
    let mut params = vec![0.0; layout.total()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for (w, _, fan_in) in layout.layers() {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for p in &mut params[w] {
            *p = rng.gen_range(-bound..bound);
        }
    }
    Ok(GeoNet { config, params, vocabulary, convention })
}

/// Activations of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    x: [f64; FEATURE_DIM],
    z0: Vec<f64>,
    /// `h[0]` after the input projection, `h[j + 1]` after block `j`.
    h: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Trace {
    /// Penultimate representation (input to the output layer).
    pub fn embedding(&self) -> &[f64] {
        self.h.last().expect("at least the input projection")
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    let cols = x.len();
    out.clear();
    out.extend(b.iter().enumerate().map(|(i, bi)| {
        let row = &w[i * cols..(i + 1) * cols];
        bi + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }));
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[class]` without forming the probability.
pub fn neg_log_softmax(logits: &[f64], class: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    lse - logits[class]
}

// out[j] += sum_i w[i, j] * g[i]   (W^T g)
fn add_transpose_matvec(w: &[f64], g: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (i, gi) in g.iter().enumerate() {
        if *gi == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (o, wij) in out.iter_mut().zip(row) {
            *o += wij * gi;
        }
    }
}

// dW += g x^T, db += g
fn add_outer(dw: &mut [f64], db: &mut [f64], g: &[f64], x: &[f64]) {
    let cols = x.len();
    for (i, gi) in g.iter().enumerate() {
        if *gi == 0.0 {
            continue;
        }
        db[i] += gi;
        let row = &mut dw[i * cols..(i + 1) * cols];
        for (d, xj) in row.iter_mut().zip(x) {
            *d += gi * xj;
        }
    }
}

impl GeoNet {
    pub fn config(&self) -> &GeoNetConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &ClassVocabulary {
        &self.vocabulary
    }

    pub fn convention(&self) -> FeatureConvention {
        self.convention
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.config.hidden_width, self.config.classes, self.config.residual_blocks)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn from_parts(
        config: GeoNetConfig,
        params: Vec<f64>,
        vocabulary: ClassVocabulary,
        convention: FeatureConvention,
    ) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config.hidden_width, config.classes, config.residual_blocks);
        if params.len() != layout.total() || vocabulary.len() != config.classes {
            return Err(Error::CorruptFile(format!(
                "expected {} parameters and {} classes, found {} and {}",
                layout.total(),
                config.classes,
                params.len(),
                vocabulary.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::CorruptFile("non-finite parameter".into()));
        }
        Ok(Self { config, params, vocabulary, convention })
    }

    pub fn trace(&self, x: &EncodedFeatures) -> Trace {
        let l = self.layout();
        let p = &self.params;
        let mut z0 = Vec::new();
        affine(&p[l.input_weight()], &p[l.input_bias()], &x.0, &mut z0);
        let mut h = vec![relu(&z0)];
        let (mut us, mut rs, mut vs) = (Vec::new(), Vec::new(), Vec::new());
        for b in 0..self.config.residual_blocks {
            let hin = h.last().unwrap();
            let mut u = Vec::new();
            affine(&p[l.block_w1(b)], &p[l.block_b1(b)], hin, &mut u);
            let r = relu(&u);
            let mut v = Vec::new();
            affine(&p[l.block_w2(b)], &p[l.block_b2(b)], &r, &mut v);
            let next: Vec<f64> = hin.iter().zip(&v).map(|(a, b)| a + b.max(0.0)).collect();
            h.push(next);
            us.push(u);
            rs.push(r);
            vs.push(v);
        }
        let mut logits = Vec::new();
        affine(&p[l.output_weight()], &p[l.output_bias()], h.last().unwrap(), &mut logits);
        let probs = softmax(&logits);
        Trace { x: x.0, z0, h, u: us, r: rs, v: vs, logits, probs }
    }

    pub fn forward(&self, x: &EncodedFeatures) -> ProbVector {
        ProbVector::normalize(self.trace(x).probs)
    }

    /// Encode with this network's feature convention, then run forward.
    pub fn predict(&self, obs: &Observation) -> ProbVector {
        self.forward(&self.convention.encode(obs))
    }

    /// Accumulate parameter gradients into `grads`, given the loss gradient
    /// with respect to the logits and optionally the embedding.
    pub fn backward(&self, trace: &Trace, dlogits: &[f64], dembedding: Option<&[f64]>, grads: &mut [f64]) {
        let l = self.layout();
        let p = &self.params;
        let hw = self.config.hidden_width;
        let nb = self.config.residual_blocks;

        {
            let (head, tail) = grads.split_at_mut(l.output_bias().start);
            add_outer(&mut head[l.output_weight()], &mut tail[..self.config.classes], dlogits, &trace.h[nb]);
        }
        let mut dh = vec![0.0; hw];
        add_transpose_matvec(&p[l.output_weight()], dlogits, &mut dh);
        if let Some(de) = dembedding {
            for (a, b) in dh.iter_mut().zip(de) {
                *a += b;
            }
        }

        for b in (0..nb).rev() {
            // h_{b+1} = h_b + relu(v); v = W2 r + b2; r = relu(u); u = W1 h_b + b1
            let dv: Vec<f64> = dh.iter().zip(&trace.v[b]).map(|(g, v)| if *v > 0.0 { *g } else { 0.0 }).collect();
            {
                let (head, tail) = grads.split_at_mut(l.block_b2(b).start);
                add_outer(&mut head[l.block_w2(b)], &mut tail[..hw], &dv, &trace.r[b]);
            }
            let mut dr = vec![0.0; hw];
            add_transpose_matvec(&p[l.block_w2(b)], &dv, &mut dr);
            let du: Vec<f64> = dr.iter().zip(&trace.u[b]).map(|(g, u)| if *u > 0.0 { *g } else { 0.0 }).collect();
            {
                let (head, tail) = grads.split_at_mut(l.block_b1(b).start);
                add_outer(&mut head[l.block_w1(b)], &mut tail[..hw], &du, &trace.h[b]);
            }
            add_transpose_matvec(&p[l.block_w1(b)], &du, &mut dh);
        }

        let dz0: Vec<f64> = dh.iter().zip(&trace.z0).map(|(g, z)| if *z > 0.0 { *g } else { 0.0 }).collect();
        let (head, tail) = grads.split_at_mut(l.input_bias().start);
        add_outer(&mut head[l.input_weight()], &mut tail[..hw], &dz0, &trace.x);
    }

    /// Weighted soft-target cross-entropy `Σ w_i·(−Σ_c t_ic log p_ic) / Σ w_i`
    /// and its gradient. Each target row must sum to one.
    pub fn soft_loss_and_gradients(
        &self,
        features: &[EncodedFeatures],
        targets: &[Vec<f64>],
        weights: Option<&[f64]>,
    ) -> (f64, Vec<f64>) {
        assert_eq!(features.len(), targets.len());
        assert!(!features.is_empty(), "empty batch");
        let total_w: f64 = match weights {
            Some(w) => w.iter().sum(),
            None => features.len() as f64,
        };
        assert!(total_w > 0.0, "batch weights are all zero");
        let mut grads = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (i, (x, t)) in features.iter().zip(targets).enumerate() {
            let w = weights.map_or(1.0, |w| w[i]) / total_w;
            if w == 0.0 {
                continue;
            }
            let trace = self.trace(x);
            let sample: f64 = t
                .iter()
                .enumerate()
                .filter(|(_, tc)| **tc != 0.0)
                .map(|(c, tc)| tc * neg_log_softmax(&trace.logits, c))
                .sum();
            loss += w * sample;
            let dlogits: Vec<f64> = trace.probs.iter().zip(t).map(|(p, tc)| w * (p - tc)).collect();
            self.backward(&trace, &dlogits, None, &mut grads);
        }
        (loss, grads)
    }
}

/// Weighted mean of `−log p[true class]` over the batch and its gradient
/// with respect to every parameter. Weights are normalized to mean one.
pub fn loss_and_gradients(
    net: &GeoNet,
    features: &[EncodedFeatures],
    labels: &[usize],
    weights: Option<&[f64]>,
) -> (f64, Vec<f64>) {
    let c = net.config.classes;
    let targets: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| {
            let mut t = vec![0.0; c];
            t[y] = 1.0;
            t
        })
        .collect();
    net.soft_loss_and_gradients(features, &targets, weights)
}
