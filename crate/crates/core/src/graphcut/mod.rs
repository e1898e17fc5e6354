//! Discrete MAP inference over labelled graphs.

mod expansion;
mod maxflow;

pub use expansion::{alpha_expansion, brute_force_map, ExpansionResult};
pub use maxflow::{max_flow, Arc, FlowNetwork, MinCut};

use crate::corpus::LabelId;
use crate::error::{Error, Result};

/// Pairwise energy on one edge; `table[i * |cand(v)| + j]` is the energy of
/// `u` taking its `i`-th candidate and `v` its `j`-th.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTerm {
    pub u: usize,
    pub v: usize,
    pub table: Vec<f64>,
}

/// Unary and pairwise energies over per-vertex candidate label sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelingProblem {
    /// Sorted, duplicate-free candidate labels per vertex.
    pub candidates: Vec<Vec<LabelId>>,
    /// `unary[v][i]`: energy of vertex `v` taking `candidates[v][i]`.
    pub unary: Vec<Vec<f64>>,
    pub pairwise: Vec<PairwiseTerm>,
}

impl LabelingProblem {
    pub fn vertex_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.unary.len() != self.candidates.len() {
            return Err(Error::malformed(
                "unary table count differs from vertex count",
            ));
        }
        for (v, (cand, un)) in self.candidates.iter().zip(&self.unary).enumerate() {
            if cand.is_empty() {
                return Err(Error::malformed(format!(
                    "vertex {v} has no candidate label"
                )));
            }
            if cand.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::malformed(format!(
                    "vertex {v} candidates not sorted/unique"
                )));
            }
            if un.len() != cand.len() || un.iter().any(|e| !e.is_finite()) {
                return Err(Error::malformed(format!("vertex {v} unary table invalid")));
            }
        }
        for t in &self.pairwise {
            let n = self.candidates.len();
            if t.u >= n || t.v >= n || t.u == t.v {
                return Err(Error::malformed(format!("invalid edge ({}, {})", t.u, t.v)));
            }
            let expect = self.candidates[t.u].len() * self.candidates[t.v].len();
            if t.table.len() != expect || t.table.iter().any(|e| !e.is_finite()) {
                return Err(Error::malformed(format!(
                    "pairwise table on ({}, {}) invalid",
                    t.u, t.v
                )));
            }
        }
        Ok(())
    }

    fn index_of(&self, v: usize, label: LabelId) -> Option<usize> {
        self.candidates[v].binary_search(&label).ok()
    }

    /// Candidate indices of a labelling; fails if any label is not a candidate.
    pub fn indices(&self, labeling: &[LabelId]) -> Result<Vec<usize>> {
        if labeling.len() != self.vertex_count() {
            return Err(Error::malformed(
                "labeling length differs from vertex count",
            ));
        }
        labeling
            .iter()
            .enumerate()
            .map(|(v, &l)| {
                self.index_of(v, l).ok_or_else(|| {
                    Error::malformed(format!("label {l} is not a candidate of vertex {v}"))
                })
            })
            .collect()
    }

    fn energy_of_indices(&self, idx: &[usize]) -> f64 {
        let unary: f64 = idx.iter().enumerate().map(|(v, &i)| self.unary[v][i]).sum();
        let pair: f64 = self
            .pairwise
            .iter()
            .map(|t| t.table[idx[t.u] * self.candidates[t.v].len() + idx[t.v]])
            .sum();
        unary + pair
    }

    /// Total energy of a labelling.
    pub fn energy(&self, labeling: &[LabelId]) -> Result<f64> {
        Ok(self.energy_of_indices(&self.indices(labeling)?))
    }

    /// Per-vertex unary argmin (lowest candidate index on ties).
    pub fn unary_argmin(&self) -> Vec<LabelId> {
        self.candidates
            .iter()
            .zip(&self.unary)
            .map(|(cand, un)| {
                let mut best = 0;
                for (i, &e) in un.iter().enumerate() {
                    if e < un[best] {
                        best = i;
                    }
                }
                cand[best]
            })
            .collect()
    }
}
