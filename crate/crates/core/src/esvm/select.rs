use serde::{Deserialize, Serialize};

use crate::corpus::{ImageRecord, Region, RegionId};
use crate::features::{chi_square, ImageFeatures};

/// Width in pixels of the ring around a region used as its local background.
pub const BORDER_BAND: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub a_min: f64,
    pub a_max: f64,
    pub tau_sel: f64,
    pub n_sel: usize,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            a_min: 0.02,
            a_max: 0.6,
            tau_sel: 0.05,
            n_sel: 4,
        }
    }
}

/// Confidence that `region` is a foreground object: an area gate times a
/// centre prior times the χ² contrast against the surrounding band.
pub fn selection_score(
    image: &ImageRecord,
    features: &ImageFeatures,
    region: &Region,
    params: &SelectionParams,
) -> f64 {
    if region.area_fraction < params.a_min || region.area_fraction > params.a_max {
        return 0.0;
    }
    let (dy, dx) = (region.centroid.0 - 0.5, region.centroid.1 - 0.5);
    let centrality = (-(dy * dy + dx * dx) / 0.18).exp();
    let band = border_band(region);
    if band.is_empty() {
        return 0.0;
    }
    let inside = features.histogram(image, &region.mask);
    let outside = features.histogram_of(image, band);
    match (inside, outside) {
        (Ok(a), Ok(b)) => centrality * chi_square(&a, &b),
        _ => 0.0,
    }
}

/// Flat indices of pixels outside the region within [`BORDER_BAND`]
/// (Chebyshev distance) of it.
fn border_band(region: &Region) -> Vec<usize> {
    let mask = &region.mask;
    let (h, w) = (mask.height(), mask.width());
    let b = &region.bbox;
    let top = b.top.saturating_sub(BORDER_BAND);
    let left = b.left.saturating_sub(BORDER_BAND);
    let bottom = (b.bottom + BORDER_BAND).min(h);
    let right = (b.right + BORDER_BAND).min(w);
    let mut out = Vec::new();
    for row in top..bottom {
        for col in left..right {
            if *mask.get(row, col) {
                continue;
            }
            let r0 = row.saturating_sub(BORDER_BAND);
            let c0 = col.saturating_sub(BORDER_BAND);
            let r1 = (row + BORDER_BAND + 1).min(h);
            let c1 = (col + BORDER_BAND + 1).min(w);
            let near = (r0..r1).any(|r| (c0..c1).any(|c| *mask.get(r, c)));
            if near {
                out.push(row * w + col);
            }
        }
    }
    out
}

/// Regions whose selection score exceeds `tau_sel`, best first (ties by
/// region index), at most `n_sel`.
pub fn select_regions(
    image: &ImageRecord,
    regions: &[Region],
    params: &SelectionParams,
) -> Vec<RegionId> {
    if regions.is_empty() {
        return Vec::new();
    }
    let features = ImageFeatures::new(image);
    let mut scored: Vec<(f64, RegionId)> = regions
        .iter()
        .map(|r| (selection_score(image, &features, r, params), r.id))
        .filter(|(s, _)| *s > params.tau_sel)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(params.n_sel);
    scored.into_iter().map(|(_, id)| id).collect()
}
