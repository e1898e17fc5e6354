use std::collections::BTreeSet;

use super::maxflow::{max_flow, FlowNetwork};
use super::LabelingProblem;
use crate::corpus::LabelId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionResult {
    pub labeling: Vec<LabelId>,
    pub energy: f64,
    pub sweeps: usize,
    /// Energy before any move, then after every accepted move.
    pub accepted_energies: Vec<f64>,
    /// Energy at the end of each sweep.
    pub sweep_energies: Vec<f64>,
}

/// Alpha-expansion: sweeps over every label in ascending id order, solving
/// one binary min-cut per label and keeping the move only when the true
/// energy strictly drops. Stops after a sweep with no accepted move or
/// after `max_sweeps` sweeps.
pub fn alpha_expansion(
    problem: &LabelingProblem,
    initial: &[LabelId],
    max_sweeps: usize,
) -> Result<ExpansionResult> {
    problem.validate()?;
    problem.indices(initial)?;
    let labels: BTreeSet<LabelId> = problem.candidates.iter().flatten().copied().collect();
    let mut labeling = initial.to_vec();
    let mut energy = problem.energy(&labeling)?;
    let mut accepted = vec![energy];
    let mut sweep_energies = Vec::new();
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut changed = false;
        for &alpha in &labels {
            let proposal = expansion_move(problem, &labeling, alpha)?;
            let e = problem.energy(&proposal)?;
            if e < energy - 1e-12 * energy.abs().max(1.0) {
                labeling = proposal;
                energy = e;
                accepted.push(e);
                changed = true;
            }
        }
        sweep_energies.push(energy);
        if !changed {
            break;
        }
    }
    Ok(ExpansionResult {
        labeling,
        energy,
        sweeps,
        accepted_energies: accepted,
        sweep_energies,
    })
}

/// Best labelling reachable from `current` by letting any subset of
/// vertices switch to `alpha`, under the submodular surrogate.
fn expansion_move(
    problem: &LabelingProblem,
    current: &[LabelId],
    alpha: LabelId,
) -> Result<Vec<LabelId>> {
    let n = problem.vertex_count();
    let cur = problem.indices(current)?;
    // binary variable per vertex that may switch
    let mut var = vec![usize::MAX; n];
    let mut alpha_idx = vec![usize::MAX; n];
    let mut vars = Vec::new();
    for v in 0..n {
        if let Some(a) = problem.index_of(v, alpha) {
            alpha_idx[v] = a;
            if a != cur[v] {
                var[v] = vars.len();
                vars.push(v);
            }
        }
    }
    if vars.is_empty() {
        return Ok(current.to_vec());
    }
    // linear coefficient on x_v (x_v = 1: switch to alpha)
    let mut lin = vec![0.0; vars.len()];
    let mut pair_arcs = Vec::new();
    for (k, &v) in vars.iter().enumerate() {
        lin[k] += problem.unary[v][alpha_idx[v]] - problem.unary[v][cur[v]];
    }
    for t in &problem.pairwise {
        let width = problem.candidates[t.v].len();
        let at = |i: usize, j: usize| t.table[i * width + j];
        let (vu, vv) = (var[t.u], var[t.v]);
        match (vu != usize::MAX, vv != usize::MAX) {
            (false, false) => {}
            (true, false) => {
                lin[vu] += at(alpha_idx[t.u], cur[t.v]) - at(cur[t.u], cur[t.v]);
            }
            (false, true) => {
                lin[vv] += at(cur[t.u], alpha_idx[t.v]) - at(cur[t.u], cur[t.v]);
            }
            (true, true) => {
                let a = at(cur[t.u], cur[t.v]);
                let b = at(cur[t.u], alpha_idx[t.v]);
                let c = at(alpha_idx[t.u], cur[t.v]);
                let mut d = at(alpha_idx[t.u], alpha_idx[t.v]);
                if a + d > b + c {
                    // truncate: lower the (alpha, alpha) entry until submodular
                    d = b + c - a;
                }
                // E = A + (C−A) x_u + (D−C) x_v + (B+C−A−D)(1−x_u) x_v
                lin[vu] += c - a;
                lin[vv] += d - c;
                let w = b + c - a - d;
                if w > 0.0 {
                    pair_arcs.push((vu, vv, w));
                }
            }
        }
    }
    let s = vars.len();
    let t = s + 1;
    let mut net = FlowNetwork::new(vars.len() + 2, s, t)?;
    for (k, &c) in lin.iter().enumerate() {
        // x = 1 means sink side
        if c > 0.0 {
            net.add_arc(s, k, c)?;
        } else if c < 0.0 {
            net.add_arc(k, t, -c)?;
        }
    }
    for (u, v, w) in pair_arcs {
        net.add_arc(u, v, w)?;
    }
    let cut = max_flow(&net)?;
    let mut out = current.to_vec();
    for (k, &v) in vars.iter().enumerate() {
        if !cut.source_side[k] {
            out[v] = alpha;
        }
    }
    Ok(out)
}

/// Upper bound on the number of labellings [`brute_force_map`] enumerates.
pub const BRUTE_FORCE_LIMIT: u64 = 2_000_000;

/// Exact MAP by enumeration. Ties go to the lexicographically smallest
/// labelling (vertex 0 most significant).
pub fn brute_force_map(problem: &LabelingProblem) -> Result<Vec<LabelId>> {
    problem.validate()?;
    let mut space: u64 = 1;
    for c in &problem.candidates {
        space = space.saturating_mul(c.len() as u64);
        if space > BRUTE_FORCE_LIMIT {
            return Err(Error::OracleTooLarge(format!(
                "search space exceeds {BRUTE_FORCE_LIMIT} labelings"
            )));
        }
    }
    let n = problem.vertex_count();
    let mut idx = vec![0usize; n];
    let mut best = idx.clone();
    let mut best_e = problem.energy_of_indices(&idx);
    // odometer with the last vertex fastest gives lexicographic order
    'outer: loop {
        let mut v = n;
        loop {
            if v == 0 {
                break 'outer;
            }
            v -= 1;
            idx[v] += 1;
            if idx[v] < problem.candidates[v].len() {
                break;
            }
            idx[v] = 0;
        }
        let e = problem.energy_of_indices(&idx);
        if e < best_e - 1e-12 * best_e.abs().max(1.0) {
            best_e = e;
            best.copy_from_slice(&idx);
        }
    }
    Ok(best
        .iter()
        .enumerate()
        .map(|(v, &i)| problem.candidates[v][i])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::PairwiseTerm;
    use super::*;

    fn potts(n_labels: usize, w: f64) -> Vec<f64> {
        (0..n_labels * n_labels)
            .map(|k| if k / n_labels == k % n_labels { 0.0 } else { w })
            .collect()
    }

    fn chain(unary: Vec<Vec<f64>>, w: f64) -> LabelingProblem {
        let n = unary.len();
        let labels = unary[0].len();
        LabelingProblem {
            candidates: vec![(0..labels as LabelId).collect(); n],
            unary,
            pairwise: (0..n - 1)
                .map(|u| PairwiseTerm {
                    u,
                    v: u + 1,
                    table: potts(labels, w),
                })
                .collect(),
        }
    }

    #[test]
    fn zero_pairwise_gives_unary_argmin() {
        let mut p = chain(vec![vec![3.0, 1.0, 2.0], vec![0.0, 5.0, 1.0]], 0.0);
        p.pairwise[0].table.iter_mut().for_each(|x| *x = 0.0);
        let r = alpha_expansion(&p, &[0, 1], 10).unwrap();
        assert_eq!(r.labeling, vec![1, 0]);
    }

    #[test]
    fn single_vertex() {
        let p = LabelingProblem {
            candidates: vec![vec![2, 5]],
            unary: vec![vec![1.0, 0.0]],
            pairwise: vec![],
        };
        assert_eq!(brute_force_map(&p).unwrap(), vec![5]);
        let r = alpha_expansion(&p, &[2], 10).unwrap();
        assert_eq!(r.labeling, vec![5]);
    }

    #[test]
    fn three_chain_matches_oracle() {
        let p = chain(vec![vec![0.0, 2.0], vec![2.0, 0.0], vec![0.0, 2.0]], 1.0);
        let exact = brute_force_map(&p).unwrap();
        // all eight labellings: (0,0,0) costs 2, (0,1,0) costs 2 as well;
        // lexicographic tie-break picks (0,0,0)
        assert_eq!(exact, vec![0, 0, 0]);
        let r = alpha_expansion(&p, &p.unary_argmin(), 10).unwrap();
        assert_eq!(r.energy, p.energy(&exact).unwrap());
    }

    #[test]
    fn zero_energies_tie_to_lexicographic_minimum() {
        let p = LabelingProblem {
            candidates: vec![vec![1, 3], vec![0, 2]],
            unary: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            pairwise: vec![],
        };
        assert_eq!(brute_force_map(&p).unwrap(), vec![1, 0]);
    }

    #[test]
    fn invalid_initial_labeling() {
        let p = LabelingProblem {
            candidates: vec![vec![0, 1]],
            unary: vec![vec![0.0, 0.0]],
            pairwise: vec![],
        };
        assert!(matches!(
            alpha_expansion(&p, &[4], 3),
            Err(Error::MalformedInput(_))
        ));
    }

    #[test]
    fn oracle_too_large() {
        let p = LabelingProblem {
            candidates: vec![vec![0, 1, 2, 3]; 11],
            unary: vec![vec![0.0; 4]; 11],
            pairwise: vec![],
        };
        assert!(matches!(brute_force_map(&p), Err(Error::OracleTooLarge(_))));
    }
}
