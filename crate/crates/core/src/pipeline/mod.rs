//! End-to-end orchestration: Phase I to a fixed point, Phase II once per
//! batch, evaluation and cross validation.

pub mod colabeling;
pub mod config;
pub mod cosegment;
pub mod cv;
pub mod eval;

pub use colabeling::{run_colabeling, train_model, Phase2Output};
pub use config::Config;
pub use cosegment::{run_cosegmentation, Phase1Output};
pub use cv::{cross_validate, CvReport, FoldReport, FoldSplit, MeanStd};
pub use eval::{evaluate, Metrics, METRIC_CONVENTIONS};

use serde::Serialize;

use crate::corpus::{Corpus, LabelId};
use crate::error::Result;
use crate::raster::Grid;

/// Output of a full run: cross-validated predictions for every image.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: CvReport,
    /// Corpus order.
    pub label_maps: Vec<Grid<LabelId>>,
}

/// Metadata written next to the predictions of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta<'a> {
    pub config: &'a Config,
    pub version: &'static str,
    pub images: usize,
    pub phase1_iterations: Vec<usize>,
    pub phase1_converged: Vec<bool>,
    pub metric_conventions: &'static str,
}

impl RunOutput {
    pub fn meta<'a>(&self, config: &'a Config) -> RunMeta<'a> {
        RunMeta {
            config,
            version: env!("CARGO_PKG_VERSION"),
            images: self.label_maps.len(),
            phase1_iterations: self
                .report
                .folds
                .iter()
                .map(|f| f.phase1_iterations)
                .collect(),
            phase1_converged: self
                .report
                .folds
                .iter()
                .map(|f| f.phase1_converged)
                .collect(),
            metric_conventions: METRIC_CONVENTIONS,
        }
    }
}

/// The evaluation protocol: every image is labeled by a model that never
/// saw its annotation.
pub fn run(corpus: &Corpus, config: &Config) -> Result<RunOutput> {
    let report = cross_validate(corpus, config)?;
    let label_maps = report.label_maps();
    Ok(RunOutput { report, label_maps })
}
