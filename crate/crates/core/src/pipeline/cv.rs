use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::colabeling::{fit_model, image_training_data, run_colabeling, ImageTrainingData};
use super::cosegment::run_cosegmentation;
use super::eval::{evaluate, ground_truths, Metrics};
use super::Config;
use crate::corpus::{Corpus, LabelId};
use crate::error::{Error, Result};
use crate::raster::Grid;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_count: usize,
    /// Fold of each image, in corpus order.
    pub assignment: Vec<usize>,
}

impl FoldSplit {
    /// Shuffles image positions with `seed` and deals them round-robin, so
    /// fold sizes differ by at most one.
    pub fn new(image_count: usize, fold_count: usize, seed: u64) -> Result<Self> {
        if fold_count == 0 || fold_count > image_count {
            return Err(Error::Config(format!(
                "fold_count {fold_count} must lie in 1..={image_count} (the number of images)"
            )));
        }
        let mut order: Vec<usize> = (0..image_count).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignment = vec![0; image_count];
        for (pos, &img) in order.iter().enumerate() {
            assignment[img] = pos % fold_count;
        }
        Ok(FoldSplit {
            fold_count,
            assignment,
        })
    }

    pub fn test_images(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_images(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub images: Vec<String>,
    pub metrics: Metrics,
    pub phase1_iterations: usize,
    pub phase1_converged: bool,
    pub exemplars: usize,
    pub propagations: usize,
    pub exterior_edges: usize,
    pub total_energy: f64,
    /// Predicted label maps of `images`, in the same order.
    #[serde(skip)]
    pub label_maps: Vec<Grid<LabelId>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub split: FoldSplit,
    pub folds: Vec<FoldReport>,
    #[serde(rename = "aPA")]
    pub apa: MeanStd,
    #[serde(rename = "mAGR")]
    pub magr: MeanStd,
}

impl CvReport {
    /// Predicted label map of every corpus image, in corpus order.
    pub fn label_maps(&self) -> Vec<Grid<LabelId>> {
        let mut out: Vec<Option<Grid<LabelId>>> = vec![None; self.split.assignment.len()];
        for fold in &self.folds {
            for (i, map) in self
                .split
                .test_images(fold.fold)
                .into_iter()
                .zip(&fold.label_maps)
            {
                out[i] = Some(map.clone());
            }
        }
        out.into_iter()
            .map(|m| m.expect("every image is in one fold"))
            .collect()
    }
}

/// Runs one held-out fold given the precomputed training data of every image.
fn run_fold(
    corpus: &Corpus,
    split: &FoldSplit,
    fold: usize,
    data: &[ImageTrainingData],
    config: &Config,
) -> Result<FoldReport> {
    let train: Vec<&ImageTrainingData> = split
        .train_images(fold)
        .into_iter()
        .map(|i| &data[i])
        .collect();
    let model = fit_model(&train, corpus.vocabulary.len())?;
    let test_idx = split.test_images(fold);
    let test = corpus.subset(&test_idx);
    let phase1 = run_cosegmentation(&test, config)?;
    let phase2 = run_colabeling(&test, &phase1, &model, config)?;
    let metrics = evaluate(
        &phase2.label_maps,
        &ground_truths(&test)?,
        &corpus.vocabulary,
    )?;
    Ok(FoldReport {
        fold,
        images: test.images.iter().map(|i| i.id.clone()).collect(),
        metrics,
        phase1_iterations: phase1.iterations,
        phase1_converged: phase1.converged,
        exemplars: phase1.exemplars.len(),
        propagations: phase1.propagations.len(),
        exterior_edges: phase2.exterior_edges,
        total_energy: phase2.total_energy,
        label_maps: phase2.label_maps,
    })
}

/// Seeded k-fold cross validation: fit the label model on all other folds,
/// run both phases on the held-out fold, evaluate, aggregate.
pub fn cross_validate(corpus: &Corpus, config: &Config) -> Result<CvReport> {
    config.validate()?;
    let split = FoldSplit::new(corpus.images.len(), config.fold_count, config.seed)?;
    ground_truths(corpus)?;
    let data = corpus
        .images
        .par_iter()
        .map(|img| image_training_data(img, config.theta))
        .collect::<Result<Vec<_>>>()?;
    let folds = (0..split.fold_count)
        .into_par_iter()
        .map(|f| run_fold(corpus, &split, f, &data, config))
        .collect::<Result<Vec<_>>>()?;
    let apa = MeanStd::of(&folds.iter().map(|f| f.metrics.apa).collect::<Vec<_>>());
    let magr = MeanStd::of(&folds.iter().map(|f| f.metrics.magr).collect::<Vec<_>>());
    Ok(CvReport {
        split,
        folds,
        apa,
        magr,
    })
}
