use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ridge on `α` so the fit stays finite when the two classes separate.
const ALPHA_RIDGE: f64 = 1e-3;
const MAX_NEWTON_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub alpha: f64,
    pub beta: f64,
}

impl Calibration {
    /// `1 / (1 + exp(−α (raw − β)))`.
    pub fn score(&self, raw: f64) -> f64 {
        sigmoid(self.alpha * (raw - self.beta))
    }
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Penalised negative log-likelihood in the `(a, c)` parametrisation,
/// `p = sig(a·s + c)`.
fn objective(samples: &[(f64, bool)], a: f64, c: f64) -> f64 {
    let nll: f64 = samples
        .iter()
        .map(|&(s, y)| {
            let t = a * s + c;
            if y {
                softplus(-t)
            } else {
                softplus(t)
            }
        })
        .sum();
    nll + 0.5 * ALPHA_RIDGE * a * a
}

/// Maximum-likelihood logistic fit of `P(positive | raw score)` by damped
/// Newton steps with `α` kept positive.
///
/// With only one class present the fit is undefined; the error carries the
/// fallback `(α, β) = (1, mean score)`, which [`calibrate_or_fallback`]
/// applies.
pub fn calibrate(samples: &[(f64, bool)]) -> Result<Calibration> {
    let positives = samples.iter().filter(|s| s.1).count();
    if samples.is_empty() || positives == 0 || positives == samples.len() {
        let beta = if samples.is_empty() {
            0.0
        } else {
            samples.iter().map(|s| s.0).sum::<f64>() / samples.len() as f64
        };
        return Err(Error::CalibrationDegenerate { alpha: 1.0, beta });
    }
    if samples.iter().any(|s| !s.0.is_finite()) {
        return Err(Error::malformed("non-finite calibration score"));
    }
    let (mut a, mut c) = (1.0, 0.0);
    let mut f = objective(samples, a, c);
    for _ in 0..MAX_NEWTON_STEPS {
        let (mut ga, mut gc) = (ALPHA_RIDGE * a, 0.0);
        let (mut haa, mut hac, mut hcc) = (ALPHA_RIDGE, 0.0, 0.0);
        for &(s, y) in samples {
            let p = sigmoid(a * s + c);
            let r = p - if y { 1.0 } else { 0.0 };
            ga += r * s;
            gc += r;
            let q = p * (1.0 - p);
            haa += q * s * s;
            hac += q * s;
            hcc += q;
        }
        let det = haa * hcc - hac * hac;
        let (da, dc) = if det > 1e-300 {
            ((hcc * ga - hac * gc) / det, (haa * gc - hac * ga) / det)
        } else {
            (ga, gc)
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let (na, nc) = (a - t * da, c - t * dc);
            if na > 0.0 {
                let nf = objective(samples, na, nc);
                if nf <= f {
                    moved = nf < f;
                    a = na;
                    c = nc;
                    f = nf;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved || (da * t).abs().max((dc * t).abs()) < 1e-12 {
            break;
        }
    }
    Ok(Calibration {
        alpha: a,
        beta: -c / a,
    })
}

/// [`calibrate`], substituting the documented fallback on degenerate data;
/// the flag tells whether the fallback was used.
pub fn calibrate_or_fallback(samples: &[(f64, bool)]) -> Result<(Calibration, bool)> {
    match calibrate(samples) {
        Ok(c) => Ok((c, false)),
        Err(Error::CalibrationDegenerate { alpha, beta }) => {
            Ok((Calibration { alpha, beta }, true))
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn midpoint_and_monotonicity() {
        let c = Calibration {
            alpha: 3.0,
            beta: -0.7,
        };
        assert_eq!(c.score(-0.7), 0.5);
        assert!(c.score(0.0) > c.score(-0.1));
        assert!(c.score(-5.0) > 0.0 && c.score(5.0) < 1.0);
    }

    #[test]
    fn single_class_is_degenerate() {
        let samples = [(1.0, true), (3.0, true)];
        match calibrate(&samples) {
            Err(Error::CalibrationDegenerate { alpha, beta }) => {
                assert_eq!(alpha, 1.0);
                assert_eq!(beta, 2.0);
            }
            other => panic!("{other:?}"),
        }
        let (c, flagged) = calibrate_or_fallback(&samples).unwrap();
        assert!(flagged);
        assert_eq!(c.beta, 2.0);
    }

    #[test]
    fn separable_data_stays_finite() {
        let samples = [(2.0, true), (-1.0, false), (-0.5, false), (-2.0, false)];
        let c = calibrate(&samples).unwrap();
        assert!(c.alpha.is_finite() && c.alpha > 0.0);
        assert!(c.score(2.0) > 0.5 && c.score(-0.5) < 0.5);
    }

    #[test]
    fn recovers_generating_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let truth = Calibration {
            alpha: 2.0,
            beta: 0.3,
        };
        let samples: Vec<(f64, bool)> = (0..500)
            .map(|_| {
                let s: f64 = rng.random_range(-2.7..3.3);
                (s, rng.random::<f64>() < truth.score(s))
            })
            .collect();
        let c = calibrate(&samples).unwrap();
        assert!((c.alpha - 2.0).abs() < 0.2 * 2.5, "{c:?}");
        assert!((c.beta - 0.3).abs() < 0.2, "{c:?}");
    }
}
