//! Label-model fitting on annotated images and Phase II inference.

use std::collections::HashMap;

use rayon::prelude::*;

use super::cosegment::{Phase1Output, Prepared};
use super::Config;
use crate::colabel::{
    adjacent_regions, exterior_links, train_label_model, BatchEntry, CoLabelGraph, LabelModel,
    RegionFeatures, TrainingRegion,
};
use crate::corpus::{Corpus, ImageRecord, LabelId, Region, RegionId, SuperpixelGraph};
use crate::error::{Error, Result};
use crate::features::ImageFeatures;
use crate::graphcut::{alpha_expansion, LabelingProblem};
use crate::grouping::group_image;
use crate::raster::Grid;

/// Labelled regions of one annotated image plus the label pairs of its
/// adjacent regions.
#[derive(Debug, Clone)]
pub struct ImageTrainingData {
    pub regions: Vec<TrainingRegion>,
    pub adjacent: Vec<(LabelId, LabelId)>,
}

/// Most frequent ground-truth label under `mask`; ties go to the lower id.
pub fn majority_label(ground_truth: &Grid<LabelId>, mask: &Grid<bool>) -> Option<LabelId> {
    let mut counts: HashMap<LabelId, usize> = HashMap::new();
    for (&l, &m) in ground_truth.as_slice().iter().zip(mask.as_slice()) {
        if m {
            *counts.entry(l).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l)
}

/// Groups an annotated image without propagations and labels each region
/// by ground-truth majority.
pub fn image_training_data(image: &ImageRecord, theta: f64) -> Result<ImageTrainingData> {
    let gt = image.ground_truth.as_ref().ok_or_else(|| {
        Error::InsufficientData(format!("image `{}` has no ground truth", image.id))
    })?;
    let graph = SuperpixelGraph::build(image)?;
    let partition = group_image(image, &graph, &[], theta)?.partition;
    let regions = graph.regions(0, &partition)?;
    let feats = ImageFeatures::new(image);
    let labels: Vec<LabelId> = regions
        .iter()
        .map(|r| majority_label(gt, &r.mask).expect("regions are nonempty"))
        .collect();
    let training = regions
        .iter()
        .zip(&labels)
        .map(|(r, &label)| {
            Ok(TrainingRegion {
                features: RegionFeatures {
                    histogram: feats.histogram(image, &r.mask)?,
                    centroid: r.centroid,
                },
                label,
            })
        })
        .collect::<Result<_>>()?;
    let adjacent = adjacent_regions(&regions)
        .into_iter()
        .map(|(a, b)| (labels[a], labels[b]))
        .collect();
    Ok(ImageTrainingData {
        regions: training,
        adjacent,
    })
}

pub fn fit_model(data: &[&ImageTrainingData], vocabulary_len: usize) -> Result<LabelModel> {
    let regions: Vec<TrainingRegion> = data
        .iter()
        .flat_map(|d| d.regions.iter().copied())
        .collect();
    let adjacent: Vec<(LabelId, LabelId)> = data
        .iter()
        .flat_map(|d| d.adjacent.iter().copied())
        .collect();
    train_label_model(&regions, &adjacent, vocabulary_len)
}

/// Fits a label model on the annotated images `indices` of `corpus`.
pub fn train_model(corpus: &Corpus, indices: &[usize], config: &Config) -> Result<LabelModel> {
    let data = indices
        .par_iter()
        .map(|&i| image_training_data(&corpus.images[i], config.theta))
        .collect::<Result<Vec<_>>>()?;
    fit_model(&data.iter().collect::<Vec<_>>(), corpus.vocabulary.len())
}

#[derive(Debug, Clone)]
pub struct Phase2Output {
    pub label_maps: Vec<Grid<LabelId>>,
    /// Label per graph vertex.
    pub labeling: Vec<LabelId>,
    pub total_energy: f64,
    /// Energy attributed to each image, in corpus order.
    pub per_image_energy: Vec<f64>,
    pub sweeps: usize,
    pub exterior_edges: usize,
}

/// The joint co-labeling graph over every region of the batch.
pub fn build_graph(
    corpus: &Corpus,
    regions: &[Vec<Region>],
    phase1: &Phase1Output,
    model: &LabelModel,
    config: &Config,
) -> Result<CoLabelGraph> {
    let batch: Vec<BatchEntry> = corpus
        .images
        .iter()
        .zip(regions)
        .map(|(image, regions)| BatchEntry { image, regions })
        .collect();
    let sources: HashMap<String, RegionId> = phase1
        .exemplars
        .iter()
        .map(|e| (e.id.clone(), e.source))
        .collect();
    let links = exterior_links(&batch, &phase1.propagations, &sources);
    CoLabelGraph::build(&batch, &links, model, &config.energy())
}

/// Builds one model over the whole batch and paints the labels back onto
/// pixels. Alpha-expansion first labels each image on its own (exterior
/// edges dropped) and then refines that labeling on the joint model, so the
/// joint energy never exceeds the per-image solution's.
pub fn run_colabeling(
    corpus: &Corpus,
    phase1: &Phase1Output,
    model: &LabelModel,
    config: &Config,
) -> Result<Phase2Output> {
    if let Some(img) = corpus
        .images
        .iter()
        .find(|i| i.tags.iter().any(|&t| t as usize >= model.vocabulary_len))
    {
        return Err(Error::Config(format!(
            "image `{}` carries a tag outside the vocabulary",
            img.id
        )));
    }
    let prepared = Prepared {
        graphs: corpus
            .images
            .par_iter()
            .map(SuperpixelGraph::build)
            .collect::<Result<Vec<_>>>()?,
        grays: Vec::new(),
    };
    let regions = prepared.regions(&phase1.partitions)?;
    let graph = build_graph(corpus, &regions, phase1, model, config)?;
    let problem = graph.to_problem();
    let local = without_exterior(&problem, &graph);
    let start = alpha_expansion(&local, &local.unary_argmin(), config.max_sweeps)?;
    let result = alpha_expansion(&problem, &start.labeling, config.max_sweeps)?;
    let batch: Vec<BatchEntry> = corpus
        .images
        .iter()
        .zip(&regions)
        .map(|(image, regions)| BatchEntry { image, regions })
        .collect();
    let label_maps = graph.paint(&batch, &result.labeling)?;
    let by_image = graph.per_image_energy(&result.labeling)?;
    let per_image_energy = (0..corpus.images.len())
        .map(|i| by_image.get(&i).copied().unwrap_or(0.0))
        .collect();
    Ok(Phase2Output {
        label_maps,
        labeling: result.labeling,
        total_energy: result.energy,
        per_image_energy,
        sweeps: result.sweeps,
        exterior_edges: graph.exterior.len(),
    })
}

/// The same problem with every exterior edge dropped, so each image is
/// labeled on its own.
pub fn without_exterior(problem: &LabelingProblem, graph: &CoLabelGraph) -> LabelingProblem {
    LabelingProblem {
        pairwise: problem.pairwise[..graph.interior.len()].to_vec(),
        ..problem.clone()
    }
}
