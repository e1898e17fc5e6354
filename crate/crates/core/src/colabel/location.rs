use serde::{Deserialize, Serialize};

use crate::corpus::LabelId;
use crate::error::{Error, Result};

pub const COVARIANCE_RIDGE: f64 = 1e-3;

/// A 2-D Gaussian over normalised (row, col) centroids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian2 {
    pub mean: (f64, f64),
    /// Row-major `[[σ_rr, σ_rc], [σ_rc, σ_cc]]`.
    pub cov: [[f64; 2]; 2],
}

impl Gaussian2 {
    /// `exp(−½ (x−μ)ᵀ Σ⁻¹ (x−μ))`: the density divided by its peak.
    pub fn score(&self, x: (f64, f64)) -> f64 {
        let [[a, b], [_, d]] = self.cov;
        let det = a * d - b * b;
        let (dy, dx) = (x.0 - self.mean.0, x.1 - self.mean.1);
        let q = (d * dy * dy - 2.0 * b * dy * dx + a * dx * dx) / det;
        (-0.5 * q).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationModel {
    /// Indexed by label id; `None` for labels without training samples.
    pub per_label: Vec<Option<Gaussian2>>,
}

/// Prior used for labels that never occur in training: centred, wide.
pub const FALLBACK: Gaussian2 = Gaussian2 {
    mean: (0.5, 0.5),
    cov: [[0.25, 0.0], [0.0, 0.25]],
};

/// Sample mean and unbiased sample covariance per label, plus a ridge.
pub fn fit_location(
    samples: &[((f64, f64), LabelId)],
    vocabulary_len: usize,
) -> Result<LocationModel> {
    let mut groups: Vec<Vec<(f64, f64)>> = vec![Vec::new(); vocabulary_len];
    for &(x, l) in samples {
        groups
            .get_mut(l as usize)
            .ok_or_else(|| Error::UnknownLabel(format!("label id {l} outside the vocabulary")))?
            .push(x);
    }
    let per_label = groups
        .iter()
        .map(|g| {
            if g.is_empty() {
                return None;
            }
            let n = g.len() as f64;
            let my = g.iter().map(|p| p.0).sum::<f64>() / n;
            let mx = g.iter().map(|p| p.1).sum::<f64>() / n;
            let mut cov = [[0.0; 2]; 2];
            if g.len() > 1 {
                for p in g {
                    let (dy, dx) = (p.0 - my, p.1 - mx);
                    cov[0][0] += dy * dy;
                    cov[0][1] += dy * dx;
                    cov[1][1] += dx * dx;
                }
                for v in cov.iter_mut().flatten() {
                    *v /= n - 1.0;
                }
            }
            cov[1][0] = cov[0][1];
            cov[0][0] += COVARIANCE_RIDGE;
            cov[1][1] += COVARIANCE_RIDGE;
            Some(Gaussian2 {
                mean: (my, mx),
                cov,
            })
        })
        .collect();
    Ok(LocationModel { per_label })
}

impl LocationModel {
    pub fn gaussian(&self, label: LabelId) -> Result<Gaussian2> {
        match self.per_label.get(label as usize) {
            Some(g) => Ok(g.unwrap_or(FALLBACK)),
            None => Err(Error::UnknownLabel(format!(
                "label id {label} outside the vocabulary"
            ))),
        }
    }

    /// Peak-normalised location likelihood of `label` at `x`, in `(0, 1]`.
    pub fn score(&self, label: LabelId, x: (f64, f64)) -> Result<f64> {
        Ok(self.gaussian(label)?.score(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn single_sample_has_ridge_covariance() {
        let m = fit_location(&[((0.4, 0.6), 1)], 2).unwrap();
        let g = m.per_label[1].unwrap();
        assert_eq!(g.mean, (0.4, 0.6));
        assert_eq!(g.cov, [[1e-3, 0.0], [0.0, 1e-3]]);
        assert!(m.per_label[0].is_none());
        assert_eq!(m.score(1, (0.4, 0.6)).unwrap(), 1.0);
    }

    #[test]
    fn symmetric_samples_center() {
        let s = [
            ((0.3, 0.5), 0),
            ((0.7, 0.5), 0),
            ((0.5, 0.2), 0),
            ((0.5, 0.8), 0),
        ];
        let g = fit_location(&s, 1).unwrap().per_label[0].unwrap();
        assert!((g.mean.0 - 0.5).abs() < 1e-12 && (g.mean.1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_sigma_along_axis() {
        let g = Gaussian2 {
            mean: (0.3, 0.5),
            cov: [[0.01, 0.0], [0.0, 0.04]],
        };
        assert!((g.score((0.4, 0.5)) - (-0.5f64).exp()).abs() < 1e-12);
        assert!((g.score((0.3, 0.3)) - (-0.5f64).exp()).abs() < 1e-12);
        assert!((g.score((0.2, 0.5)) - g.score((0.4, 0.5))).abs() < 1e-12);
    }

    #[test]
    fn refit_known_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (ny, nx) = (
            Normal::new(0.3, 0.1).unwrap(),
            Normal::new(0.5, 0.02f64.sqrt()).unwrap(),
        );
        let s: Vec<_> = (0..100)
            .map(|_| ((ny.sample(&mut rng), nx.sample(&mut rng)), 0))
            .collect();
        let g = fit_location(&s, 1).unwrap().per_label[0].unwrap();
        assert!((g.mean.0 - 0.3).abs() < 0.03 && (g.mean.1 - 0.5).abs() < 0.03);
        assert!((g.cov[0][0] - 0.01).abs() < 0.3 * 0.01 + COVARIANCE_RIDGE);
        assert!((g.cov[1][1] - 0.02).abs() < 0.3 * 0.02 + COVARIANCE_RIDGE);
    }

    #[test]
    fn unknown_label() {
        let m = fit_location(&[], 2).unwrap();
        assert!(matches!(
            m.score(7, (0.5, 0.5)),
            Err(Error::UnknownLabel(_))
        ));
        assert!(fit_location(&[((0.1, 0.1), 3)], 2).is_err());
    }
}
