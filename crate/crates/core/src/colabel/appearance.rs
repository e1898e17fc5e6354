//! One-vs-one kernel SVMs over appearance histograms.
//!
//! Kernel `K(x, y) = exp(−γ χ²(x, y))` with `γ = 1 / median pairwise χ²`.
//! Each pair is a soft-margin SVM (box `C`) solved in the dual by
//! coordinate ascent; the bias is absorbed by adding 1 to the kernel.

use std::collections::BTreeMap;

use crate::corpus::LabelId;
use crate::error::{Error, Result};
use crate::features::{chi_square, Histogram40};

pub const BOX_C: f64 = 10.0;
const MAX_EPOCHS: usize = 500;
const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
struct PairClassifier {
    /// Lower label id; positive class.
    a: LabelId,
    b: LabelId,
    /// Indices into the model's samples with non-zero dual weight.
    support: Vec<usize>,
    /// `α_i y_i` per support sample.
    coef: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceModel {
    pub gamma: f64,
    samples: Vec<Histogram40>,
    /// Labels that had training samples, ascending.
    pub trained_labels: Vec<LabelId>,
    /// Vocabulary labels without samples; they never receive votes.
    pub excluded_labels: Vec<LabelId>,
    pairs: Vec<PairClassifier>,
}

fn kernel(gamma: f64, a: &Histogram40, b: &Histogram40) -> f64 {
    (-gamma * chi_square(a, b)).exp()
}

/// Trains every pairwise classifier over the labels present in `samples`.
pub fn train_appearance(
    samples: &[(Histogram40, LabelId)],
    vocabulary_len: usize,
) -> Result<AppearanceModel> {
    if samples.is_empty() {
        return Err(Error::InsufficientData(
            "appearance model needs training regions".into(),
        ));
    }
    if let Some((_, l)) = samples.iter().find(|(_, l)| *l as usize >= vocabulary_len) {
        return Err(Error::UnknownLabel(format!(
            "label id {l} outside the vocabulary"
        )));
    }
    let hists: Vec<Histogram40> = samples.iter().map(|s| s.0).collect();
    let mut by_label: BTreeMap<LabelId, Vec<usize>> = BTreeMap::new();
    for (i, (_, l)) in samples.iter().enumerate() {
        by_label.entry(*l).or_default().push(i);
    }
    let trained_labels: Vec<LabelId> = by_label.keys().copied().collect();
    let excluded_labels = (0..vocabulary_len as LabelId)
        .filter(|l| !by_label.contains_key(l))
        .collect();
    let gamma = bandwidth(&hists);
    let gram: Vec<Vec<f64>> = hists
        .iter()
        .map(|a| hists.iter().map(|b| kernel(gamma, a, b)).collect())
        .collect();
    let mut pairs = Vec::new();
    for (i, &a) in trained_labels.iter().enumerate() {
        for &b in &trained_labels[i + 1..] {
            let mut idx = by_label[&a].clone();
            let n_a = idx.len();
            idx.extend_from_slice(&by_label[&b]);
            let y: Vec<f64> = (0..idx.len())
                .map(|k| if k < n_a { 1.0 } else { -1.0 })
                .collect();
            let alpha = dual_coordinate_ascent(&gram, &idx, &y);
            let (support, coef) = idx
                .iter()
                .zip(alpha.iter().zip(&y))
                .filter(|(_, (&al, _))| al > 0.0)
                .map(|(&s, (&al, &yy))| (s, al * yy))
                .unzip();
            pairs.push(PairClassifier {
                a,
                b,
                support,
                coef,
            });
        }
    }
    Ok(AppearanceModel {
        gamma,
        samples: hists,
        trained_labels,
        excluded_labels,
        pairs,
    })
}

fn bandwidth(hists: &[Histogram40]) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for (i, a) in hists.iter().enumerate() {
        for b in &hists[i + 1..] {
            d.push(chi_square(a, b));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let median = if d.len() % 2 == 1 {
        d[d.len() / 2]
    } else {
        0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2])
    };
    if median > 0.0 {
        1.0 / median
    } else {
        1.0
    }
}

/// Dual of the hinge-loss SVM with kernel `K + 1`, in fixed sample order.
fn dual_coordinate_ascent(gram: &[Vec<f64>], idx: &[usize], y: &[f64]) -> Vec<f64> {
    let n = idx.len();
    let k = |i: usize, j: usize| gram[idx[i]][idx[j]] + 1.0;
    let mut alpha = vec![0.0; n];
    // f[i] = Σ_j α_j y_j K'(j, i)
    let mut f = vec![0.0; n];
    for _ in 0..MAX_EPOCHS {
        let mut max_change: f64 = 0.0;
        for i in 0..n {
            let g = y[i] * f[i] - 1.0;
            let kii = k(i, i);
            let new = (alpha[i] - g / kii).clamp(0.0, BOX_C);
            let delta = new - alpha[i];
            if delta != 0.0 {
                alpha[i] = new;
                for (j, fj) in f.iter_mut().enumerate() {
                    *fj += delta * y[i] * k(i, j);
                }
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < TOLERANCE {
            break;
        }
    }
    alpha
}

impl AppearanceModel {
    fn decision(&self, pair: &PairClassifier, h: &Histogram40) -> f64 {
        pair.support
            .iter()
            .zip(&pair.coef)
            .map(|(&s, &c)| c * (kernel(self.gamma, &self.samples[s], h) + 1.0))
            .sum()
    }

    /// Vote fractions over `labels` (sorted, unique): each pairwise
    /// classifier between two of them casts one vote, a zero decision
    /// going to the lower label. Labels without training data get 0; if
    /// only one trained label remains it gets everything.
    pub fn votes_among(&self, h: &Histogram40, labels: &[LabelId]) -> Vec<f64> {
        let active: Vec<bool> = labels
            .iter()
            .map(|l| self.trained_labels.binary_search(l).is_ok())
            .collect();
        let mut votes = vec![0.0; labels.len()];
        let mut total = 0.0;
        for pair in &self.pairs {
            let (Ok(ia), Ok(ib)) = (labels.binary_search(&pair.a), labels.binary_search(&pair.b))
            else {
                continue;
            };
            total += 1.0;
            if self.decision(pair, h) >= 0.0 {
                votes[ia] += 1.0;
            } else {
                votes[ib] += 1.0;
            }
        }
        if total == 0.0 {
            // at most one trained label among `labels`
            for (v, &a) in votes.iter_mut().zip(&active) {
                *v = if a { 1.0 } else { 0.0 };
            }
            return votes;
        }
        votes.iter().map(|v| v / total).collect()
    }

    /// Vote fraction of `label` among every trained label.
    pub fn score(&self, h: &Histogram40, label: LabelId) -> f64 {
        let labels = &self.trained_labels;
        match labels.binary_search(&label) {
            Ok(i) => self.votes_among(h, labels)[i],
            Err(_) => 0.0,
        }
    }

    /// Winning label among every trained label; ties go to the lower id.
    pub fn predict(&self, h: &Histogram40) -> LabelId {
        let v = self.votes_among(h, &self.trained_labels);
        let mut best = 0;
        for (i, &x) in v.iter().enumerate() {
            if x > v[best] {
                best = i;
            }
        }
        self.trained_labels[best]
    }
}
