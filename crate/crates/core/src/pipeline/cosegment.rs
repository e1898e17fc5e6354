//! Phase I: grouping, exemplar training and mask propagation, repeated
//! until no partition changes.

use rayon::prelude::*;

use super::Config;
use crate::corpus::{Corpus, Partition, PropagationRecord, Region, RegionId, SuperpixelGraph};
use crate::error::{Error, Result};
use crate::esvm::{propagate, select_regions, train_exemplar, BatchImage, Exemplar};
use crate::grouping::group_image;
use crate::raster::{grayscale, Grid};

/// Per-image data that stays fixed across iterations.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graphs: Vec<SuperpixelGraph>,
    pub grays: Vec<Grid<f64>>,
}

impl Prepared {
    pub fn new(corpus: &Corpus) -> Result<Self> {
        let graphs = corpus
            .images
            .par_iter()
            .map(SuperpixelGraph::build)
            .collect::<Result<Vec<_>>>()?;
        let grays = corpus
            .images
            .par_iter()
            .map(|i| grayscale(&i.pixels))
            .collect();
        Ok(Prepared { graphs, grays })
    }

    pub fn regions(&self, partitions: &[Partition]) -> Result<Vec<Vec<Region>>> {
        self.graphs
            .par_iter()
            .zip(partitions)
            .enumerate()
            .map(|(i, (g, p))| g.regions(i, p))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Phase1Output {
    pub partitions: Vec<Partition>,
    /// Multicut objective per image for the final partitions.
    pub objectives: Vec<f64>,
    /// Exemplars whose propagations shaped the final partitions. Sources
    /// refer to regions of the final partitions.
    pub exemplars: Vec<Exemplar>,
    /// Propagations that entered the final grouping (score-filtered).
    pub propagations: Vec<PropagationRecord>,
    pub iterations: usize,
    pub converged: bool,
    /// Selected regions that could not be turned into exemplars.
    pub skipped_exemplars: usize,
}

/// Groups every image given the propagations aimed at it.
pub fn group_all(
    corpus: &Corpus,
    prepared: &Prepared,
    propagations: &[PropagationRecord],
    config: &Config,
) -> Result<Vec<(Partition, f64)>> {
    corpus
        .images
        .par_iter()
        .zip(&prepared.graphs)
        .enumerate()
        .map(|(i, (img, graph))| {
            let mine: Vec<&PropagationRecord> = propagations
                .iter()
                .filter(|p| p.target_image == i)
                .collect();
            let s = group_image(img, graph, &mine, config.theta)?;
            Ok((s.partition, s.objective))
        })
        .collect()
}

/// One round of selection, exemplar training and propagation over the
/// batch. Returned propagations are already score-filtered.
pub fn esvm_round(
    corpus: &Corpus,
    prepared: &Prepared,
    regions: &[Vec<Region>],
    config: &Config,
) -> Result<(Vec<Exemplar>, Vec<PropagationRecord>, usize)> {
    let selection = config.selection();
    let selected: Vec<Vec<RegionId>> = corpus
        .images
        .par_iter()
        .zip(regions)
        .map(|(img, rs)| select_regions(img, rs, &selection))
        .collect();
    let batch: Vec<BatchImage> = corpus
        .images
        .iter()
        .enumerate()
        .map(|(i, img)| BatchImage {
            index: i,
            id: &img.id,
            gray: &prepared.grays[i],
            exclude: selected[i]
                .iter()
                .map(|r| crate::esvm::padded(regions[i][r.index].bbox, &prepared.grays[i]))
                .collect(),
        })
        .collect();
    let params = config.esvm();
    let jobs: Vec<RegionId> = selected.into_iter().flatten().collect();
    let trained: Vec<Option<Exemplar>> = jobs
        .par_iter()
        .map(|r| {
            match train_exemplar(
                &batch,
                r.image,
                &regions[r.image][r.index],
                &params,
                config.seed,
            ) {
                Ok(e) => Ok(Some(e)),
                Err(
                    Error::InsufficientData(_)
                    | Error::PatchTooSmall(_)
                    | Error::DegenerateRegion(_),
                ) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let skipped = trained.iter().filter(|e| e.is_none()).count();
    let exemplars: Vec<Exemplar> = trained.into_iter().flatten().collect();
    let targets: Vec<(usize, &Grid<f64>)> = prepared.grays.iter().enumerate().collect();
    let detection = config.detection();
    let propagations = exemplars
        .par_iter()
        .map(|e| propagate(e, &targets, &detection))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .filter(|p| p.score >= config.min_propagation_score)
        .collect();
    Ok((exemplars, propagations, skipped))
}

/// Points each exemplar at the region of `regions` that best overlaps its
/// original source mask.
fn remap_sources(exemplars: &mut [Exemplar], old: &[Vec<Region>], new: &[Vec<Region>]) {
    for e in exemplars {
        let src = &old[e.source.image][e.source.index].mask;
        let best = new[e.source.image]
            .iter()
            .map(|r| {
                let (mut inter, mut union) = (0usize, 0usize);
                for (&a, &b) in src.as_slice().iter().zip(r.mask.as_slice()) {
                    inter += usize::from(a && b);
                    union += usize::from(a || b);
                }
                (inter as f64 / union.max(1) as f64, r.id)
            })
            .fold(None, |acc: Option<(f64, RegionId)>, x| match acc {
                Some(a) if a.0 >= x.0 => Some(a),
                _ => Some(x),
            });
        if let Some((_, id)) = best {
            e.source = id;
        }
    }
}

/// Iterates group → select/train → propagate until two consecutive
/// groupings agree on every image or `max_phase1_iters` is reached. The
/// first grouping sees no propagations.
pub fn run_cosegmentation(corpus: &Corpus, config: &Config) -> Result<Phase1Output> {
    config.validate()?;
    let prepared = Prepared::new(corpus)?;
    run_prepared(corpus, &prepared, config)
}

pub(crate) fn run_prepared(
    corpus: &Corpus,
    prepared: &Prepared,
    config: &Config,
) -> Result<Phase1Output> {
    let mut propagations: Vec<PropagationRecord> = Vec::new();
    let mut exemplars: Vec<Exemplar> = Vec::new();
    let mut skipped = 0;
    let mut previous: Option<(Vec<Partition>, Vec<Vec<Region>>)> = None;
    for iteration in 1..=config.max_phase1_iters {
        let (partitions, objectives): (Vec<_>, Vec<_>) =
            group_all(corpus, prepared, &propagations, config)?
                .into_iter()
                .unzip();
        let converged = previous.as_ref().is_some_and(|(p, _)| *p == partitions);
        if converged || iteration == config.max_phase1_iters {
            if let (false, Some((_, old))) = (converged, &previous) {
                let new = prepared.regions(&partitions)?;
                remap_sources(&mut exemplars, old, &new);
            }
            return Ok(Phase1Output {
                partitions,
                objectives,
                exemplars,
                propagations,
                iterations: iteration,
                converged,
                skipped_exemplars: skipped,
            });
        }
        let regions = prepared.regions(&partitions)?;
        let (e, p, s) = esvm_round(corpus, prepared, &regions, config)?;
        exemplars = e;
        propagations = p;
        skipped = s;
        previous = Some((partitions, regions));
    }
    unreachable!("the loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, SceneSpec};

    fn small_config() -> Config {
        Config {
            esvm_iterations: 60,
            negatives: 40,
            ..Config::default()
        }
    }

    #[test]
    fn no_detections_means_second_pass_confirms() {
        let corpus = generate(&SceneSpec::default(), 2).unwrap();
        let config = Config {
            k_top: 0,
            ..small_config()
        };
        let out = run_cosegmentation(&corpus, &config).unwrap();
        assert_eq!(out.iterations, 2);
        assert!(out.converged);
        assert!(out.propagations.is_empty());
    }

    #[test]
    fn converged_state_is_a_fixed_point() {
        let corpus = generate(&SceneSpec::default(), 3).unwrap();
        let config = small_config();
        let a = run_cosegmentation(&corpus, &config).unwrap();
        assert!(a.iterations <= config.max_phase1_iters);
        let b = run_cosegmentation(&corpus, &config).unwrap();
        assert_eq!(a.partitions, b.partitions);
        assert_eq!(a.propagations, b.propagations);
        if a.converged {
            let prepared = Prepared::new(&corpus).unwrap();
            let again: Vec<Partition> = group_all(&corpus, &prepared, &a.propagations, &config)
                .unwrap()
                .into_iter()
                .map(|x| x.0)
                .collect();
            assert_eq!(again, a.partitions);
        }
        for e in &a.exemplars {
            assert!(e.source.index < a.partitions[e.source.image].region_count);
        }
    }

    #[test]
    fn single_iteration_cap() {
        let corpus = generate(&SceneSpec::default(), 2).unwrap();
        let config = Config {
            max_phase1_iters: 1,
            ..small_config()
        };
        let out = run_cosegmentation(&corpus, &config).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(!out.converged);
        assert!(out.exemplars.is_empty());
    }
}
