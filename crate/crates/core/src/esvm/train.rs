//! Single-positive linear SVM trained by subgradient descent.
//!
//! Features are augmented with a trailing constant 1 so the bias is the
//! last weight; it is regularised like every other weight.

use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA1: f64 = 0.5;
pub const DEFAULT_LAMBDA2: f64 = 0.01;
pub const DEFAULT_ITERATIONS: usize = 300;
const RESTARTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedWeights {
    pub w: Vec<f64>,
    pub energy: f64,
    /// Best-so-far energy after each iteration of the winning restart.
    pub history: Vec<f64>,
    /// Final energy of each restart.
    pub restart_energies: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn hinge(m: f64) -> f64 {
    (1.0 - m).max(0.0)
}

/// `½‖w‖² + λ1·max(0, 1 − w·f⁺) + λ2·Σ max(0, 1 + w·f⁻)`.
pub fn energy(
    w: &[f64],
    positive: &[f64],
    negatives: &[Vec<f64>],
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    let reg = 0.5 * dot(w, w);
    let pos = lambda1 * hinge(dot(w, positive));
    let neg: f64 = negatives.iter().map(|f| hinge(-dot(w, f))).sum();
    reg + pos + lambda2 * neg
}

/// A subgradient of [`energy`]; at a kink the hinge contributes zero.
pub fn subgradient(
    w: &[f64],
    positive: &[f64],
    negatives: &[Vec<f64>],
    lambda1: f64,
    lambda2: f64,
) -> Vec<f64> {
    let mut g = w.to_vec();
    if dot(w, positive) < 1.0 {
        for (gi, fi) in g.iter_mut().zip(positive) {
            *gi -= lambda1 * fi;
        }
    }
    for f in negatives {
        if -dot(w, f) < 1.0 {
            for (gi, fi) in g.iter_mut().zip(f) {
                *gi += lambda2 * fi;
            }
        }
    }
    g
}

/// Minimises [`energy`] from three fixed starting points with step size
/// `1/t` and returns the best iterate seen. Inputs are used as given (no
/// bias augmentation).
pub fn train_weights(
    positive: &[f64],
    negatives: &[Vec<f64>],
    lambda1: f64,
    lambda2: f64,
    iterations: usize,
) -> Result<TrainedWeights> {
    if negatives.is_empty() {
        return Err(Error::InsufficientData(
            "exemplar training needs at least one negative".into(),
        ));
    }
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return Err(Error::Config(format!(
            "lambda1 and lambda2 must be positive, got {lambda1} and {lambda2}"
        )));
    }
    let dim = positive.len();
    if negatives.iter().any(|f| f.len() != dim) {
        return Err(Error::malformed(
            "negative descriptor length differs from positive",
        ));
    }
    let zero = vec![0.0; dim];
    let starts = [
        zero.clone(),
        positive.iter().map(|f| lambda1 * f).collect(),
        subgradient(&zero, positive, negatives, lambda1, lambda2)
            .iter()
            .map(|g| -g)
            .collect::<Vec<f64>>(),
    ];
    debug_assert_eq!(starts.len(), RESTARTS);
    let mut best: Option<TrainedWeights> = None;
    let mut restart_energies = Vec::with_capacity(RESTARTS);
    for start in starts {
        let run = descend(start, positive, negatives, lambda1, lambda2, iterations);
        restart_energies.push(run.energy);
        if best.as_ref().is_none_or(|b| run.energy < b.energy) {
            best = Some(run);
        }
    }
    let mut best = best.expect("three restarts");
    best.restart_energies = restart_energies;
    Ok(best)
}

fn descend(
    mut w: Vec<f64>,
    positive: &[f64],
    negatives: &[Vec<f64>],
    lambda1: f64,
    lambda2: f64,
    iterations: usize,
) -> TrainedWeights {
    let mut best_w = w.clone();
    let mut best_e = f64::INFINITY;
    let mut history = Vec::with_capacity(iterations);
    let mut neg_active = vec![false; negatives.len()];
    for t in 0..=iterations {
        // one pass gives both the energy of `w` and the active hinge set
        let pm = dot(&w, positive);
        let mut e = 0.5 * dot(&w, &w) + lambda1 * hinge(pm);
        for (f, active) in negatives.iter().zip(neg_active.iter_mut()) {
            let m = -dot(&w, f);
            e += lambda2 * hinge(m);
            *active = m < 1.0;
        }
        if e < best_e {
            best_e = e;
            best_w.copy_from_slice(&w);
        }
        if t > 0 {
            history.push(best_e);
        }
        if t == iterations {
            break;
        }
        let step = 1.0 / (t + 1) as f64;
        let mut g = w.clone();
        if pm < 1.0 {
            for (gi, fi) in g.iter_mut().zip(positive) {
                *gi -= lambda1 * fi;
            }
        }
        for (f, _) in negatives.iter().zip(&neg_active).filter(|(_, a)| **a) {
            for (gi, fi) in g.iter_mut().zip(f) {
                *gi += lambda2 * fi;
            }
        }
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= step * gi;
        }
    }
    TrainedWeights {
        w: best_w,
        energy: best_e,
        history,
        restart_energies: Vec::new(),
    }
}

/// Appends the constant bias feature.
pub fn augment(values: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(values.len() + 1);
    v.extend_from_slice(values);
    v.push(1.0);
    v
}
