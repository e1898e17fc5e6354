//! Energy terms of the co-labeling model. Every term is a negative log of
//! a factor; pairwise tables are shifted so their minimum is 0, then all
//! values are clamped to `[0, e_max]`.

use serde::{Deserialize, Serialize};

use super::LabelModel;
use crate::corpus::LabelId;
use crate::error::Result;
use crate::esvm::calibrate::sigmoid;
use crate::features::{chi_square, Histogram40};

/// Appearance compatibility of two neighbouring regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairwiseMode {
    /// `1(ℓ_m = ℓ_n) · χ²(r_m, r_n)`.
    Literal,
    /// `1(ℓ_m ≠ ℓ_n) · exp(−χ²(r_m, r_n)) · β_pair`: a contrast-sensitive
    /// Potts term that rewards similar neighbours for agreeing.
    Smoothing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub mode: PairwiseMode,
    pub beta_pair: f64,
    pub sharpness: f64,
    pub e_max: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            mode: PairwiseMode::Smoothing,
            beta_pair: 2.0,
            sharpness: 4.0,
            e_max: 20.0,
        }
    }
}

/// The appearance/location features of one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionFeatures {
    pub histogram: Histogram40,
    /// Normalised (row, col).
    pub centroid: (f64, f64),
}

/// `−log sig(a (s − 0.5)) − log g`, clamped to `[0, e_max]`.
pub fn unary_from_scores(s: f64, g: f64, params: &EnergyParams) -> f64 {
    let e = -sigmoid(params.sharpness * (s - 0.5)).ln() - g.ln();
    if e.is_nan() {
        params.e_max
    } else {
        e.clamp(0.0, params.e_max)
    }
}

/// Unary energies of `region` for each label of `candidates` (sorted);
/// the appearance vote is taken among the candidates.
pub fn unary_energies(
    model: &LabelModel,
    region: &RegionFeatures,
    candidates: &[LabelId],
    params: &EnergyParams,
) -> Result<Vec<f64>> {
    let votes = model.appearance.votes_among(&region.histogram, candidates);
    candidates
        .iter()
        .zip(votes)
        .map(|(&l, s)| {
            Ok(unary_from_scores(
                s,
                model.location.score(l, region.centroid)?,
                params,
            ))
        })
        .collect()
}

/// The appearance part of a pairwise factor, before shifting.
pub fn appearance_term(chi2: f64, same_label: bool, params: &EnergyParams) -> f64 {
    match params.mode {
        PairwiseMode::Literal => {
            if same_label {
                chi2
            } else {
                0.0
            }
        }
        PairwiseMode::Smoothing => {
            if same_label {
                0.0
            } else {
                (-chi2).exp() * params.beta_pair
            }
        }
    }
}

/// Subtracts the table minimum and clamps to `[0, e_max]`.
pub fn shift_and_clamp(table: &mut [f64], e_max: f64) {
    let min = table.iter().copied().fold(f64::INFINITY, f64::min);
    for v in table.iter_mut() {
        *v = (*v - min).clamp(0.0, e_max);
    }
}

/// Interior (same-image) table, row-major `|cand_m| × |cand_n|`.
pub fn interior_table(
    model: &LabelModel,
    m: &RegionFeatures,
    n: &RegionFeatures,
    cand_m: &[LabelId],
    cand_n: &[LabelId],
    params: &EnergyParams,
) -> Result<Vec<f64>> {
    let chi2 = chi_square(&m.histogram, &n.histogram);
    let mut table = Vec::with_capacity(cand_m.len() * cand_n.len());
    for &a in cand_m {
        for &b in cand_n {
            let psi = model.cooccurrence.get(a, b)?;
            table.push(appearance_term(chi2, a == b, params) - psi.ln());
        }
    }
    shift_and_clamp(&mut table, params.e_max);
    Ok(table)
}

/// Exterior (cross-image) table: both location terms plus the appearance
/// term; no co-occurrence factor.
pub fn exterior_table(
    model: &LabelModel,
    u: &RegionFeatures,
    v: &RegionFeatures,
    cand_u: &[LabelId],
    cand_v: &[LabelId],
    params: &EnergyParams,
) -> Result<Vec<f64>> {
    let chi2 = chi_square(&u.histogram, &v.histogram);
    let gu: Vec<f64> = cand_u
        .iter()
        .map(|&l| model.location.score(l, u.centroid))
        .collect::<Result<_>>()?;
    let gv: Vec<f64> = cand_v
        .iter()
        .map(|&l| model.location.score(l, v.centroid))
        .collect::<Result<_>>()?;
    let mut table = Vec::with_capacity(cand_u.len() * cand_v.len());
    for (i, &a) in cand_u.iter().enumerate() {
        for (j, &b) in cand_v.iter().enumerate() {
            table.push(-gu[i].ln() - gv[j].ln() + appearance_term(chi2, a == b, params));
        }
    }
    shift_and_clamp(&mut table, params.e_max);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unary_examples() {
        let p = EnergyParams::default();
        assert!((unary_from_scores(0.5, 1.0, &p) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(unary_from_scores(0.5, 1e-300, &p), p.e_max);
        assert_eq!(unary_from_scores(0.5, 0.0, &p), p.e_max);
        let e = unary_from_scores(1.0, (-0.5f64).exp(), &p);
        let expected = (1.0 + (-2.0f64).exp()).ln() + 0.5;
        assert!((e - expected).abs() < 1e-12);
        assert!((e - 0.6269).abs() < 1e-4);
    }

    #[test]
    fn appearance_term_examples() {
        let s = EnergyParams::default();
        assert_eq!(appearance_term(0.0, true, &s), 0.0);
        assert!((appearance_term(1.0, false, &s) - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((appearance_term(1.0, false, &s) - 0.7358).abs() < 1e-4);
        let l = EnergyParams {
            mode: PairwiseMode::Literal,
            ..s
        };
        assert_eq!(appearance_term(0.0, true, &l), 0.0);
        assert_eq!(appearance_term(0.3, true, &l), 0.3);
        assert_eq!(appearance_term(0.3, false, &l), 0.0);
    }

    #[test]
    fn shift_makes_min_zero() {
        let mut t = vec![3.0, 2.5, 40.0, 2.5];
        shift_and_clamp(&mut t, 20.0);
        assert_eq!(t, vec![0.5, 0.0, 20.0, 0.0]);
    }
}
