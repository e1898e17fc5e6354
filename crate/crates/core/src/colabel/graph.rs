use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::energy::{exterior_table, interior_table, unary_energies, EnergyParams, RegionFeatures};
use super::LabelModel;
use crate::corpus::{ImageRecord, LabelId, PropagationRecord, Region, RegionId};
use crate::error::{Error, Result};
use crate::features::ImageFeatures;
use crate::graphcut::{LabelingProblem, PairwiseTerm};
use crate::raster::Grid;

/// A propagated mask links its exemplar's source region to the target
/// region it overlaps best, when that overlap reaches this IoU.
pub const EXTERIOR_MIN_IOU: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub region: RegionId,
    pub candidates: Vec<LabelId>,
    pub features: RegionFeatures,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    /// Row-major `|cand u| × |cand v|`.
    pub table: Vec<f64>,
}

/// Regions of every image of the batch as vertices, joined by interior
/// (same image, adjacent) and exterior (propagation-matched) edges.
#[derive(Debug, Clone, PartialEq)]
pub struct CoLabelGraph {
    pub vertices: Vec<Vertex>,
    pub unary: Vec<Vec<f64>>,
    pub interior: Vec<Edge>,
    pub exterior: Vec<Edge>,
    index: HashMap<RegionId, usize>,
}

/// One image of the batch with its current regions.
#[derive(Clone, Copy)]
pub struct BatchEntry<'a> {
    pub image: &'a ImageRecord,
    pub regions: &'a [Region],
}

/// Pairs of regions in the same image sharing a 4-neighbour pixel boundary.
pub fn adjacent_regions(regions: &[Region]) -> Vec<(usize, usize)> {
    let Some(first) = regions.first() else {
        return Vec::new();
    };
    let (w, h) = (first.mask.width(), first.mask.height());
    let mut owner = vec![usize::MAX; w * h];
    for (k, r) in regions.iter().enumerate() {
        for (p, &m) in r.mask.as_slice().iter().enumerate() {
            if m {
                owner[p] = k;
            }
        }
    }
    let mut pairs = BTreeSet::new();
    for row in 0..h {
        for col in 0..w {
            let a = owner[row * w + col];
            for q in [
                (row + 1 < h).then(|| (row + 1) * w + col),
                (col + 1 < w).then(|| row * w + col + 1),
            ]
            .into_iter()
            .flatten()
            {
                let b = owner[q];
                if a != b && a != usize::MAX && b != usize::MAX {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    pairs.into_iter().collect()
}

fn mask_iou(a: &Grid<bool>, b: &Grid<bool>) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Cross-image region pairs induced by propagations. `sources` maps an
/// exemplar id to its source region; `batch[i]` must hold the regions of
/// corpus image `batch[i].regions[_].id.image`.
pub fn exterior_links(
    batch: &[BatchEntry],
    propagations: &[PropagationRecord],
    sources: &HashMap<String, RegionId>,
) -> Vec<(RegionId, RegionId)> {
    let by_image: HashMap<usize, &BatchEntry> = batch
        .iter()
        .filter_map(|e| e.regions.first().map(|r| (r.id.image, e)))
        .collect();
    let mut links = BTreeSet::new();
    for p in propagations {
        let (Some(&src), Some(entry)) = (
            sources.get(&p.source_exemplar),
            by_image.get(&p.target_image),
        ) else {
            continue;
        };
        if src.image == p.target_image || !by_image.contains_key(&src.image) {
            continue;
        }
        let placed = p.placed_mask(entry.image.width(), entry.image.height());
        let mut best: Option<(f64, RegionId)> = None;
        for r in entry.regions {
            let iou = mask_iou(&placed, &r.mask);
            if best.is_none_or(|(b, _)| iou > b) {
                best = Some((iou, r.id));
            }
        }
        if let Some((iou, dst)) = best {
            if iou >= EXTERIOR_MIN_IOU {
                links.insert((src.min(dst), src.max(dst)));
            }
        }
    }
    links.into_iter().collect()
}

impl CoLabelGraph {
    /// Builds vertices, edges and every energy table.
    pub fn build(
        batch: &[BatchEntry],
        links: &[(RegionId, RegionId)],
        model: &LabelModel,
        params: &EnergyParams,
    ) -> Result<Self> {
        let per_image: Vec<Vec<Vertex>> = batch
            .par_iter()
            .map(|entry| {
                let feats = ImageFeatures::new(entry.image);
                let candidates = entry.image.candidate_labels();
                if let Some(&l) = candidates
                    .iter()
                    .find(|&&l| l as usize >= model.vocabulary_len)
                {
                    return Err(Error::Config(format!(
                        "image `{}` has label id {l} outside the vocabulary",
                        entry.image.id
                    )));
                }
                entry
                    .regions
                    .iter()
                    .map(|r| {
                        Ok(Vertex {
                            region: r.id,
                            candidates: candidates.clone(),
                            features: RegionFeatures {
                                histogram: feats.histogram(entry.image, &r.mask)?,
                                centroid: r.centroid,
                            },
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let vertices: Vec<Vertex> = per_image.into_iter().flatten().collect();
        if let Some(v) = vertices.iter().find(|v| v.candidates.is_empty()) {
            return Err(Error::Config(format!(
                "region {:?} has no candidate label",
                v.region
            )));
        }
        let index: HashMap<RegionId, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.region, i))
            .collect();
        let unary = vertices
            .par_iter()
            .map(|v| unary_energies(model, &v.features, &v.candidates, params))
            .collect::<Result<Vec<_>>>()?;

        let mut interior_pairs = Vec::new();
        for entry in batch {
            for (a, b) in adjacent_regions(entry.regions) {
                interior_pairs.push((index[&entry.regions[a].id], index[&entry.regions[b].id]));
            }
        }
        let interior = interior_pairs
            .par_iter()
            .map(|&(u, v)| {
                let (a, b) = (&vertices[u], &vertices[v]);
                let table = interior_table(
                    model,
                    &a.features,
                    &b.features,
                    &a.candidates,
                    &b.candidates,
                    params,
                )?;
                Ok(Edge { u, v, table })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut exterior_pairs = BTreeSet::new();
        for (a, b) in links {
            let (Some(&u), Some(&v)) = (index.get(a), index.get(b)) else {
                return Err(Error::InvalidEdge(
                    a.index,
                    b.index,
                    "link endpoint is not in the batch".into(),
                ));
            };
            if a.image == b.image {
                return Err(Error::InvalidEdge(
                    u,
                    v,
                    "exterior link within one image".into(),
                ));
            }
            exterior_pairs.insert((u.min(v), u.max(v)));
        }
        let exterior = exterior_pairs
            .into_iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(u, v)| {
                let (a, b) = (&vertices[u], &vertices[v]);
                let table = exterior_table(
                    model,
                    &a.features,
                    &b.features,
                    &a.candidates,
                    &b.candidates,
                    params,
                )?;
                Ok(Edge { u, v, table })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CoLabelGraph {
            vertices,
            unary,
            interior,
            exterior,
            index,
        })
    }

    pub fn vertex_of(&self, region: RegionId) -> Option<usize> {
        self.index.get(&region).copied()
    }

    fn lookup(
        edges: &[Edge],
        vertices: &[Vertex],
        u: usize,
        v: usize,
        lu: LabelId,
        lv: LabelId,
    ) -> Result<f64> {
        let (edge, flip) = edges
            .iter()
            .find_map(|e| {
                if (e.u, e.v) == (u, v) {
                    Some((e, false))
                } else if (e.u, e.v) == (v, u) {
                    Some((e, true))
                } else {
                    None
                }
            })
            .ok_or_else(|| Error::InvalidEdge(u, v, "no such edge".into()))?;
        let (lu, lv) = if flip { (lv, lu) } else { (lu, lv) };
        let cu = &vertices[edge.u].candidates;
        let cv = &vertices[edge.v].candidates;
        let i = cu.binary_search(&lu).map_err(|_| {
            Error::UnknownLabel(format!(
                "label {lu} is not a candidate of vertex {}",
                edge.u
            ))
        })?;
        let j = cv.binary_search(&lv).map_err(|_| {
            Error::UnknownLabel(format!(
                "label {lv} is not a candidate of vertex {}",
                edge.v
            ))
        })?;
        Ok(edge.table[i * cv.len() + j])
    }

    /// Interior energy of vertices `u`, `v` taking labels `lu`, `lv`.
    pub fn interior_energy(&self, u: usize, v: usize, lu: LabelId, lv: LabelId) -> Result<f64> {
        Self::lookup(&self.interior, &self.vertices, u, v, lu, lv)
    }

    /// Exterior energy of vertices `u`, `v` taking labels `lu`, `lv`.
    pub fn exterior_energy(&self, u: usize, v: usize, lu: LabelId, lv: LabelId) -> Result<f64> {
        Self::lookup(&self.exterior, &self.vertices, u, v, lu, lv)
    }

    pub fn to_problem(&self) -> LabelingProblem {
        LabelingProblem {
            candidates: self.vertices.iter().map(|v| v.candidates.clone()).collect(),
            unary: self.unary.clone(),
            pairwise: self
                .interior
                .iter()
                .chain(&self.exterior)
                .map(|e| PairwiseTerm {
                    u: e.u,
                    v: e.v,
                    table: e.table.clone(),
                })
                .collect(),
        }
    }

    /// Energy attributed to each corpus image: its vertices' unaries, its
    /// interior edges and half of every incident exterior edge.
    pub fn per_image_energy(&self, labeling: &[LabelId]) -> Result<HashMap<usize, f64>> {
        let problem = self.to_problem();
        let idx = problem.indices(labeling)?;
        let mut out: HashMap<usize, f64> = HashMap::new();
        for (v, vert) in self.vertices.iter().enumerate() {
            *out.entry(vert.region.image).or_default() += self.unary[v][idx[v]];
        }
        let entry = |e: &Edge| e.table[idx[e.u] * self.vertices[e.v].candidates.len() + idx[e.v]];
        for e in &self.interior {
            *out.entry(self.vertices[e.u].region.image).or_default() += entry(e);
        }
        for e in &self.exterior {
            let x = entry(e);
            *out.entry(self.vertices[e.u].region.image).or_default() += 0.5 * x;
            *out.entry(self.vertices[e.v].region.image).or_default() += 0.5 * x;
        }
        Ok(out)
    }

    /// Paints each region's label into per-image label maps, in batch order.
    pub fn paint(&self, batch: &[BatchEntry], labeling: &[LabelId]) -> Result<Vec<Grid<LabelId>>> {
        if labeling.len() != self.vertices.len() {
            return Err(Error::malformed(
                "labeling length differs from vertex count",
            ));
        }
        batch
            .iter()
            .map(|entry| {
                let mut map = Grid::filled(entry.image.width(), entry.image.height(), 0);
                for r in entry.regions {
                    let v = self.vertex_of(r.id).ok_or_else(|| {
                        Error::malformed(format!("region {:?} is not a vertex", r.id))
                    })?;
                    for (p, &m) in r.mask.as_slice().iter().enumerate() {
                        if m {
                            map.as_mut_slice()[p] = labeling[v];
                        }
                    }
                }
                Ok(map)
            })
            .collect()
    }
}
