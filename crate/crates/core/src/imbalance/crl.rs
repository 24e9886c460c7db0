//! Hard triplet mining and the class rectification loss.
//!
//! ```text
//! L = mean_i (1 − α_{y_i}) CE_i + mean_t α_{y_a} max(0, d(a,p) − d(a,n) + margin)
//! ```
//!
//! with Euclidean `d` on the penultimate embedding.

use crate::geonet::{neg_log_softmax, softmax};

use super::ClassCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// For each minority-class anchor: farthest same-class positive and nearest
/// other-class negative. Ties resolve to the lower index.
pub fn hard_mine_triplets<E: AsRef<[f64]>>(embeddings: &[E], labels: &[usize], minority: &[bool]) -> Vec<Triplet> {
    let mut out = Vec::new();
    for (a, &ya) in labels.iter().enumerate() {
        if !minority.get(ya).copied().unwrap_or(false) {
            continue;
        }
        let ea = embeddings[a].as_ref();
        let mut positive: Option<(usize, f64)> = None;
        let mut negative: Option<(usize, f64)> = None;
        for (j, &yj) in labels.iter().enumerate() {
            if j == a {
                continue;
            }
            let d = dist(ea, embeddings[j].as_ref());
            if yj == ya {
                if positive.is_none_or(|(_, best)| d > best) {
                    positive = Some((j, d));
                }
            } else if negative.is_none_or(|(_, best)| d < best) {
                negative = Some((j, d));
            }
        }
        if let (Some((p, _)), Some((n, _))) = (positive, negative) {
            out.push(Triplet { anchor: a, positive: p, negative: n });
        }
    }
    out
}

pub fn crl_loss<L: AsRef<[f64]>, E: AsRef<[f64]>>(
    logits: &[L],
    embeddings: &[E],
    labels: &[usize],
    triplets: &[Triplet],
    alpha: &[f64],
    margin: f64,
) -> f64 {
    let ce: f64 =
        logits.iter().zip(labels).map(|(l, &y)| (1.0 - alpha[y]) * neg_log_softmax(l.as_ref(), y)).sum::<f64>()
            / labels.len() as f64;
    if triplets.is_empty() {
        return ce;
    }
    let trip: f64 = triplets
        .iter()
        .map(|t| {
            let e = |i: usize| embeddings[i].as_ref();
            let hinge = (dist(e(t.anchor), e(t.positive)) - dist(e(t.anchor), e(t.negative)) + margin).max(0.0);
            alpha[labels[t.anchor]] * hinge
        })
        .sum::<f64>()
        / triplets.len() as f64;
    ce + trip
}

/// Loss plus gradients with respect to logits and embeddings.
pub fn crl_loss_and_gradients<L: AsRef<[f64]>, E: AsRef<[f64]>>(
    logits: &[L],
    embeddings: &[E],
    labels: &[usize],
    triplets: &[Triplet],
    alpha: &[f64],
    margin: f64,
) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = labels.len() as f64;
    let loss = crl_loss(logits, embeddings, labels, triplets, alpha, margin);
    let dlogits = logits
        .iter()
        .zip(labels)
        .map(|(l, &y)| {
            let scale = (1.0 - alpha[y]) / n;
            let mut g = softmax(l.as_ref());
            g[y] -= 1.0;
            g.iter_mut().for_each(|v| *v *= scale);
            g
        })
        .collect();
    let mut demb: Vec<Vec<f64>> = embeddings.iter().map(|e| vec![0.0; e.as_ref().len()]).collect();
    let t_count = triplets.len() as f64;
    for t in triplets {
        let (ea, ep, en) =
            (embeddings[t.anchor].as_ref(), embeddings[t.positive].as_ref(), embeddings[t.negative].as_ref());
        let (dap, dan) = (dist(ea, ep), dist(ea, en));
        if dap - dan + margin <= 0.0 {
            continue;
        }
        let coef = alpha[labels[t.anchor]] / t_count;
        for k in 0..ea.len() {
            // d‖a−p‖/da = (a−p)/‖a−p‖; undefined at 0, taken as 0.
            let gp = if dap > 0.0 { coef * (ea[k] - ep[k]) / dap } else { 0.0 };
            let gn = if dan > 0.0 { coef * (ea[k] - en[k]) / dan } else { 0.0 };
            demb[t.anchor][k] += gp - gn;
            demb[t.positive][k] -= gp;
            demb[t.negative][k] += gn;
        }
    }
    (loss, dlogits, demb)
}

/// `α_c = clamp(η (1 − n_c / n_max), 0, 1)`.
pub fn alpha_schedule(counts: &ClassCounts, eta: f64) -> Vec<f64> {
    let n_max = counts.max().max(1) as f64;
    counts.counts().iter().map(|&n| (eta * (1.0 - n as f64 / n_max)).clamp(0.0, 1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_batch_has_no_triplets() {
        let emb = [[0.0], [1.0], [2.0]];
        assert!(hard_mine_triplets(&emb, &[0, 0, 0], &[true]).is_empty());
    }

    #[test]
    fn hand_distance_table() {
        // anchor 0 (minority class 1) at origin; same-class at 3.0;
        // others at 1.0 and 4.0.
        let emb = [[0.0, 0.0], [3.0, 0.0], [0.0, 1.0], [4.0, 0.0]];
        let labels = [1, 1, 0, 0];
        let t = hard_mine_triplets(&emb, &labels, &[false, true]);
        assert_eq!(
            t,
            vec![Triplet { anchor: 0, positive: 1, negative: 2 }, Triplet { anchor: 1, positive: 0, negative: 3 },]
        );
    }

    #[test]
    fn singleton_anchor_skipped() {
        let emb = [[0.0], [1.0], [2.0]];
        let t = hard_mine_triplets(&emb, &[1, 0, 0], &[true, true]);
        // class 1 appears once; class 0 anchors still mine
        assert!(t.iter().all(|t| t.anchor != 0));
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn satisfied_triplet_has_zero_hinge() {
        let emb = [[0.0], [0.1], [0.5]];
        let t = [Triplet { anchor: 0, positive: 1, negative: 2 }];
        let logits = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]];
        let loss = crl_loss(&logits, &emb, &[0, 0, 1], &t, &[1.0, 1.0], 0.2);
        assert!(loss.abs() < 1e-15);
    }

    #[test]
    fn alpha_endpoints() {
        let c = ClassCounts::from_counts(vec![10, 5, 0]);
        assert_eq!(alpha_schedule(&c, 0.5), vec![0.0, 0.25, 0.5]);
        assert_eq!(alpha_schedule(&c, 3.0), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let logits = vec![vec![0.3, -0.2, 0.9], vec![1.1, 0.4, -0.3], vec![0.0, 0.5, 0.2], vec![-0.7, 0.1, 0.6]];
        let emb = vec![vec![0.2, 0.9], vec![1.4, -0.3], vec![0.5, 0.4], vec![0.3, 1.2]];
        let labels = [1, 1, 0, 2];
        let alpha = [0.1, 0.6, 0.3];
        let margin = 1.5;
        let t = hard_mine_triplets(&emb, &labels, &[false, true, false]);
        assert!(!t.is_empty());
        let (_, dl, de) = crl_loss_and_gradients(&logits, &emb, &labels, &t, &alpha, margin);
        let h = 1e-6;
        for i in 0..4 {
            for k in 0..3 {
                let mut lp = logits.clone();
                let mut lm = logits.clone();
                lp[i][k] += h;
                lm[i][k] -= h;
                let fd = (crl_loss(&lp, &emb, &labels, &t, &alpha, margin)
                    - crl_loss(&lm, &emb, &labels, &t, &alpha, margin))
                    / (2.0 * h);
                assert!((fd - dl[i][k]).abs() < 1e-7);
            }
            for k in 0..2 {
                let mut ep = emb.clone();
                let mut em = emb.clone();
                ep[i][k] += h;
                em[i][k] -= h;
                let fd = (crl_loss(&logits, &ep, &labels, &t, &alpha, margin)
                    - crl_loss(&logits, &em, &labels, &t, &alpha, margin))
                    / (2.0 * h);
                assert!((fd - de[i][k]).abs() < 1e-7, "emb {i},{k}: {fd} vs {}", de[i][k]);
            }
        }
    }
}
