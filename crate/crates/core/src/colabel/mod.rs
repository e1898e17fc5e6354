//! Phase II: label models and the multi-image labeling graph.

pub mod appearance;
pub mod cooccurrence;
pub mod energy;
pub mod graph;
pub mod location;

pub use appearance::{train_appearance, AppearanceModel};
pub use cooccurrence::{fit_cooccurrence, Cooccurrence};
pub use energy::{EnergyParams, PairwiseMode, RegionFeatures};
pub use graph::{adjacent_regions, exterior_links, BatchEntry, CoLabelGraph, Edge, Vertex};
pub use location::{fit_location, Gaussian2, LocationModel};

use crate::corpus::LabelId;
use crate::error::Result;

/// Appearance classifier, location priors and neighbour co-occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelModel {
    pub vocabulary_len: usize,
    pub appearance: AppearanceModel,
    pub location: LocationModel,
    pub cooccurrence: Cooccurrence,
}

/// A region with a known label, used for fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingRegion {
    pub features: RegionFeatures,
    pub label: LabelId,
}

/// Fits all three parts. `adjacent` lists the label pairs of neighbouring
/// training regions.
pub fn train_label_model(
    regions: &[TrainingRegion],
    adjacent: &[(LabelId, LabelId)],
    vocabulary_len: usize,
) -> Result<LabelModel> {
    let appearance = train_appearance(
        &regions
            .iter()
            .map(|r| (r.features.histogram, r.label))
            .collect::<Vec<_>>(),
        vocabulary_len,
    )?;
    let location = fit_location(
        &regions
            .iter()
            .map(|r| (r.features.centroid, r.label))
            .collect::<Vec<_>>(),
        vocabulary_len,
    )?;
    let cooccurrence = fit_cooccurrence(adjacent, vocabulary_len)?;
    Ok(LabelModel {
        vocabulary_len,
        appearance,
        location,
        cooccurrence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::image_from_map;
    use crate::corpus::{regions_of, Partition, PropagationRecord, RegionId};
    use crate::features::{Histogram40, HISTOGRAM_BINS};
    use crate::graphcut::alpha_expansion;
    use crate::raster::Grid;
    use std::collections::HashMap;

    fn hist(bin: usize) -> Histogram40 {
        let mut raw = [0.01; HISTOGRAM_BINS];
        raw[bin] = 1.0;
        raw[24 + bin % 16] = 1.0;
        Histogram40::from_raw(&raw)
    }

    fn model() -> LabelModel {
        let regions: Vec<TrainingRegion> = (0..3u16)
            .flat_map(|l| {
                (0..4).map(move |k| TrainingRegion {
                    features: RegionFeatures {
                        histogram: hist(l as usize * 6 + k % 2),
                        centroid: (0.2 + 0.3 * l as f64, 0.5),
                    },
                    label: l,
                })
            })
            .collect();
        train_label_model(&regions, &[(0, 1), (1, 2), (0, 0)], 3).unwrap()
    }

    /// Three vertical stripes; superpixel `s` covers columns `2s..2s+2`.
    fn striped(tags: &[LabelId]) -> crate::corpus::ImageRecord {
        let mut img = image_from_map(vec![vec![0, 0, 1, 1, 2, 2]; 4]);
        img.tags = tags.iter().copied().collect();
        img
    }

    #[test]
    fn graph_shape_and_energy_ranges() {
        let m = model();
        let p = EnergyParams::default();
        let a = striped(&[1]);
        let ra = regions_of(0, &a, &Partition::singletons(3)).unwrap();
        let b = striped(&[2]);
        let rb = regions_of(1, &b, &Partition::from_assignment(&[0, 0, 1])).unwrap();
        let batch = [
            BatchEntry {
                image: &a,
                regions: &ra,
            },
            BatchEntry {
                image: &b,
                regions: &rb,
            },
        ];
        let g = CoLabelGraph::build(&batch, &[], &m, &p).unwrap();
        assert_eq!(g.vertices.len(), 5);
        // stripes 0-1, 1-2 in image a; one pair in image b
        assert_eq!(g.interior.len(), 3);
        assert!(g.exterior.is_empty());
        assert_eq!(g.vertices[0].candidates, vec![0, 1]);
        for u in &g.unary {
            assert!(u.iter().all(|&e| (0.0..=p.e_max).contains(&e)));
        }
        for e in &g.interior {
            assert!(e.table.iter().all(|&x| (0.0..=p.e_max).contains(&x)));
            assert_eq!(e.table.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        }
        assert!(g.interior_energy(0, 2, 0, 0).is_err());
        assert!(g.interior_energy(1, 0, 1, 0).is_ok());
        let r = alpha_expansion(&g.to_problem(), &g.to_problem().unary_argmin(), 10).unwrap();
        let maps = g.paint(&batch, &r.labeling).unwrap();
        assert_eq!(maps.len(), 2);
        assert!(maps[1].as_slice().iter().all(|&l| l == 0 || l == 2));
        let per_image = g.per_image_energy(&r.labeling).unwrap();
        let total: f64 = per_image.values().sum();
        assert!((total - r.energy).abs() < 1e-9);
    }

    #[test]
    fn propagation_links_are_deduplicated() {
        let m = model();
        let a = striped(&[1]);
        let ra = regions_of(0, &a, &Partition::singletons(3)).unwrap();
        let b = striped(&[1]);
        let rb = regions_of(1, &b, &Partition::singletons(3)).unwrap();
        let batch = [
            BatchEntry {
                image: &a,
                regions: &ra,
            },
            BatchEntry {
                image: &b,
                regions: &rb,
            },
        ];
        let prop = |x: usize| PropagationRecord {
            source_exemplar: "a#1".into(),
            target_image: 1,
            x,
            y: 0,
            mask: Grid::filled(2, 4, true),
            score: 0.9,
        };
        let sources = HashMap::from([("a#1".to_string(), RegionId { image: 0, index: 1 })]);
        let links = exterior_links(&batch, &[prop(2), prop(2), prop(3)], &sources);
        // x = 3 straddles stripes 1 and 2 with IoU 1/3 each; stripe 1 wins the tie
        assert_eq!(
            links,
            vec![(
                RegionId { image: 0, index: 1 },
                RegionId { image: 1, index: 1 }
            )]
        );
        let g = CoLabelGraph::build(&batch, &links, &m, &EnergyParams::default()).unwrap();
        assert_eq!(g.exterior.len(), 1);
        assert!(g.exterior_energy(1, 4, 1, 1).is_ok());
        assert!(g.exterior_energy(0, 4, 1, 1).is_err());
        // links into the source's own image are ignored
        let own = PropagationRecord {
            target_image: 0,
            ..prop(2)
        };
        assert!(exterior_links(&batch, &[own], &sources).is_empty());
    }

    #[test]
    fn three_mutually_adjacent_regions() {
        let img = image_from_map(vec![vec![0, 1], vec![2, 2]]);
        let regions = regions_of(0, &img, &Partition::singletons(3)).unwrap();
        assert_eq!(adjacent_regions(&regions), vec![(0, 1), (0, 2), (1, 2)]);
    }
}
