use serde::{Deserialize, Serialize};

use crate::corpus::LabelId;
use crate::error::{Error, Result};

/// Laplace-smoothed neighbour frequencies of label pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cooccurrence {
    pub labels: usize,
    /// Row-major `labels × labels`, symmetric, strictly positive.
    pub table: Vec<f64>,
}

impl Cooccurrence {
    pub fn get(&self, a: LabelId, b: LabelId) -> Result<f64> {
        let (a, b) = (a as usize, b as usize);
        if a >= self.labels || b >= self.labels {
            return Err(Error::UnknownLabel(format!(
                "label pair ({a}, {b}) outside the vocabulary"
            )));
        }
        Ok(self.table[a * self.labels + b])
    }
}

/// `Ψ(a, b) = (#adjacent pairs labelled {a, b} + 1) / (#adjacent pairs + |V|²)`.
pub fn fit_cooccurrence(
    adjacent: &[(LabelId, LabelId)],
    vocabulary_len: usize,
) -> Result<Cooccurrence> {
    let n = vocabulary_len;
    let mut counts = vec![0usize; n * n];
    for &(a, b) in adjacent {
        let (a, b) = (a as usize, b as usize);
        if a >= n || b >= n {
            return Err(Error::UnknownLabel(format!(
                "label pair ({a}, {b}) outside the vocabulary"
            )));
        }
        let (lo, hi) = (a.min(b), a.max(b));
        counts[lo * n + hi] += 1;
    }
    let denom = (adjacent.len() + n * n) as f64;
    let mut table = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let (lo, hi) = (a.min(b), a.max(b));
            table[a * n + b] = (counts[lo * n + hi] + 1) as f64 / denom;
        }
    }
    Ok(Cooccurrence { labels: n, table })
}
