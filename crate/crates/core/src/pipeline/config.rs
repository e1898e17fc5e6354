use serde::{Deserialize, Serialize};

use crate::colabel::{EnergyParams, PairwiseMode};
use crate::error::{Error, Result};
use crate::esvm::train::{DEFAULT_ITERATIONS, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2};
use crate::esvm::{DetectionParams, EsvmParams, SelectionParams};
use crate::grouping::DEFAULT_MERGE_BIAS;

/// Every tunable of a run. Missing keys take their defaults; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Merge bias of the multicut, in `(0, 1)`.
    pub theta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Detections kept per exemplar.
    pub k_top: usize,
    /// Sliding-window stride in pixels.
    pub stride: usize,
    pub scales: Vec<f64>,
    pub a_min: f64,
    pub a_max: f64,
    pub tau_sel: f64,
    pub n_sel: usize,
    pub e_max: f64,
    pub pairwise_mode: PairwiseMode,
    pub beta_pair: f64,
    /// Slope `a` of the appearance sigmoid in the unary term.
    pub sharpness: f64,
    pub max_phase1_iters: usize,
    pub max_sweeps: usize,
    pub seed: u64,
    pub fold_count: usize,
    /// Propagations scoring below this do not reach grouping or the graph.
    pub min_propagation_score: f64,
    pub esvm_iterations: usize,
    pub negatives: usize,
}

impl Default for Config {
    fn default() -> Self {
        let sel = SelectionParams::default();
        let det = DetectionParams::default();
        let energy = EnergyParams::default();
        Config {
            theta: DEFAULT_MERGE_BIAS,
            lambda1: DEFAULT_LAMBDA1,
            lambda2: DEFAULT_LAMBDA2,
            k_top: det.k_top,
            stride: det.stride,
            scales: det.scales,
            a_min: sel.a_min,
            a_max: sel.a_max,
            tau_sel: sel.tau_sel,
            n_sel: sel.n_sel,
            e_max: energy.e_max,
            pairwise_mode: energy.mode,
            beta_pair: energy.beta_pair,
            sharpness: energy.sharpness,
            max_phase1_iters: 10,
            max_sweeps: 10,
            seed: 42,
            fold_count: 10,
            min_propagation_score: 0.5,
            esvm_iterations: DEFAULT_ITERATIONS,
            negatives: 200,
        }
    }
}

impl Config {
    /// Parses JSON and checks every range.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Config =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, what: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(what.to_string()))
            }
        }
        check(
            self.theta > 0.0 && self.theta < 1.0,
            "theta must lie in (0, 1)",
        )?;
        check(
            self.lambda1 > 0.0 && self.lambda1.is_finite(),
            "lambda1 must be positive",
        )?;
        check(
            self.lambda2 > 0.0 && self.lambda2.is_finite(),
            "lambda2 must be positive",
        )?;
        check(self.stride >= 1, "stride must be at least 1")?;
        check(
            !self.scales.is_empty() && self.scales.iter().all(|s| *s > 0.0 && s.is_finite()),
            "scales must be a nonempty list of positive numbers",
        )?;
        check(
            (0.0..=1.0).contains(&self.a_min)
                && (0.0..=1.0).contains(&self.a_max)
                && self.a_min <= self.a_max,
            "area gates must satisfy 0 <= a_min <= a_max <= 1",
        )?;
        check(self.tau_sel >= 0.0, "tau_sel must be non-negative")?;
        check(
            self.e_max > 0.0 && self.e_max.is_finite(),
            "e_max must be positive",
        )?;
        check(
            self.beta_pair >= 0.0 && self.beta_pair.is_finite(),
            "beta_pair must be non-negative",
        )?;
        check(
            self.sharpness > 0.0 && self.sharpness.is_finite(),
            "sharpness must be positive",
        )?;
        check(
            self.max_phase1_iters >= 1,
            "max_phase1_iters must be at least 1",
        )?;
        check(self.max_sweeps >= 1, "max_sweeps must be at least 1")?;
        check(self.fold_count >= 2, "fold_count must be at least 2")?;
        check(
            (0.0..=1.0).contains(&self.min_propagation_score),
            "min_propagation_score must lie in [0, 1]",
        )?;
        check(
            self.esvm_iterations >= 1,
            "esvm_iterations must be at least 1",
        )?;
        check(self.negatives >= 1, "negatives must be at least 1")?;
        Ok(())
    }

    pub fn selection(&self) -> SelectionParams {
        SelectionParams {
            a_min: self.a_min,
            a_max: self.a_max,
            tau_sel: self.tau_sel,
            n_sel: self.n_sel,
        }
    }

    pub fn detection(&self) -> DetectionParams {
        DetectionParams {
            stride: self.stride,
            scales: self.scales.clone(),
            k_top: self.k_top,
        }
    }

    pub fn esvm(&self) -> EsvmParams {
        EsvmParams {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            iterations: self.esvm_iterations,
            negatives: self.negatives,
            detection: self.detection(),
        }
    }

    pub fn energy(&self) -> EnergyParams {
        EnergyParams {
            mode: self.pairwise_mode,
            beta_pair: self.beta_pair,
            sharpness: self.sharpness,
            e_max: self.e_max,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!((c.lambda1, c.lambda2, c.k_top), (0.5, 0.01, 5));
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), c);
        assert_eq!(Config::from_json("{}").unwrap(), c);
    }

    #[test]
    fn unknown_keys_and_bad_ranges_are_config_errors() {
        assert!(matches!(
            Config::from_json(r#"{"thetaa": 0.5}"#),
            Err(Error::Config(_))
        ));
        for bad in [
            r#"{"theta": 1.0}"#,
            r#"{"lambda2": 0}"#,
            r#"{"scales": []}"#,
            r#"{"a_min": 0.7, "a_max": 0.6}"#,
            r#"{"fold_count": 1}"#,
            r#"{"pairwise_mode": "potts"}"#,
        ] {
            assert!(
                matches!(Config::from_json(bad), Err(Error::Config(_))),
                "{bad}"
            );
        }
        let c = Config::from_json(r#"{"pairwise_mode": "literal", "k_top": 0}"#).unwrap();
        assert_eq!(c.pairwise_mode, PairwiseMode::Literal);
    }
}
