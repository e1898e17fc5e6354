//! Exemplar detectors: pick confident regions, train one linear SVM per
//! region against random negatives, calibrate its scores and slide it over
//! the batch to propagate the region's mask.

pub mod calibrate;
pub mod detect;
pub mod select;
pub mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use calibrate::{calibrate, calibrate_or_fallback, Calibration};
pub use detect::{non_maximum_suppression, propagate, scan, DetectionParams, DetectionWindow};
pub use select::{select_regions, selection_score, SelectionParams};
pub use train::{train_weights, TrainedWeights};

use crate::corpus::{Region, RegionId};
use crate::error::{Error, Result};
use crate::features::{hog, HogDescriptor, HogTemplate};
use crate::raster::{self, Grid, Rect};
use crate::seed;

/// Negatives drawn from the source image may overlap an excluded box by at
/// most this IoU.
pub const NEGATIVE_MAX_IOU: f64 = 0.3;
const NEGATIVE_TRIES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsvmParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub iterations: usize,
    pub negatives: usize,
    pub detection: DetectionParams,
}

impl Default for EsvmParams {
    fn default() -> Self {
        EsvmParams {
            lambda1: train::DEFAULT_LAMBDA1,
            lambda2: train::DEFAULT_LAMBDA2,
            iterations: train::DEFAULT_ITERATIONS,
            negatives: 200,
            detection: DetectionParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub id: String,
    pub source: RegionId,
    /// Region box plus context margin; detection windows share its shape.
    pub source_rect: Rect,
    pub template: HogTemplate,
    /// One weight per HOG dimension.
    pub w: Vec<f64>,
    pub bias: f64,
    pub calibration: Calibration,
    /// Calibration fell back to `(1, mean score)` on single-class data.
    pub calibration_fallback: bool,
    /// Source region mask over `source_rect`, at template pixel resolution.
    pub mask: Grid<bool>,
    pub energy: f64,
}

impl Exemplar {
    pub fn raw_score(&self, descriptor: &[f64]) -> f64 {
        self.w
            .iter()
            .zip(descriptor)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + self.bias
    }
}

/// One grayscale image of the batch and the boxes negatives must avoid.
pub struct BatchImage<'a> {
    pub index: usize,
    pub id: &'a str,
    pub gray: &'a Grid<f64>,
    pub exclude: Vec<Rect>,
}

/// Trains and calibrates the exemplar of `region`, which lies in
/// `batch[source]`. Negatives come half from the source image (away from
/// its excluded boxes) and half from the other images of the batch.
pub fn train_exemplar(
    batch: &[BatchImage],
    source: usize,
    region: &Region,
    params: &EsvmParams,
    base_seed: u64,
) -> Result<Exemplar> {
    let src = &batch[source];
    let rect = padded(region.bbox, src.gray);
    let template = HogTemplate::for_size(rect.height(), rect.width());
    let positive = hog(&raster::crop(src.gray, rect), template)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(
        base_seed,
        &[region.id.image as u64, region.id.index as u64],
    ));
    let negatives = sample_negatives(&mut rng, batch, source, rect, template, params)?;
    if negatives.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no negative windows for region {} of image {}",
            region.id.index, src.id
        )));
    }
    let pos = train::augment(&positive.values);
    let negs: Vec<Vec<f64>> = negatives
        .iter()
        .map(|d| train::augment(&d.values))
        .collect();
    let trained = train_weights(
        &pos,
        &negs,
        params.lambda1,
        params.lambda2,
        params.iterations,
    )?;
    let (bias, w) = trained.w.split_last().expect("bias weight");
    let mut exemplar = Exemplar {
        id: format!("{}#{}", src.id, region.id.index),
        source: region.id,
        source_rect: rect,
        template,
        w: w.to_vec(),
        bias: *bias,
        calibration: Calibration {
            alpha: 1.0,
            beta: 0.0,
        },
        calibration_fallback: false,
        mask: template_mask(region, rect, template),
        energy: trained.energy,
    };
    let mut samples = vec![(exemplar.raw_score(&positive.values), true)];
    samples.extend(
        negatives
            .iter()
            .map(|d| (exemplar.raw_score(&d.values), false)),
    );
    let (calibration, fallback) = calibrate_or_fallback(&samples)?;
    exemplar.calibration = calibration;
    exemplar.calibration_fallback = fallback;
    Ok(exemplar)
}

/// The region box grown by a sixth of its size (at least 2 px) per side so
/// the template sees the region's outline, clipped to the image.
pub fn padded(bbox: Rect, gray: &Grid<f64>) -> Rect {
    let py = (bbox.height() / 6).max(2);
    let px = (bbox.width() / 6).max(2);
    Rect {
        top: bbox.top.saturating_sub(py),
        left: bbox.left.saturating_sub(px),
        bottom: (bbox.bottom + py).min(gray.height()),
        right: (bbox.right + px).min(gray.width()),
    }
}

fn template_mask(region: &Region, rect: Rect, template: HogTemplate) -> Grid<bool> {
    let crop = raster::crop(&region.mask, rect);
    let mut mask = raster::resize_nearest(&crop, template.pixel_width(), template.pixel_height());
    if !mask.as_slice().iter().any(|&m| m) {
        mask = Grid::filled(template.pixel_width(), template.pixel_height(), true);
    }
    mask
}

fn random_window(rng: &mut ChaCha8Rng, gray: &Grid<f64>, base: Rect, scales: &[f64]) -> Rect {
    let scale = if scales.is_empty() {
        1.0
    } else {
        scales[rng.random_range(0..scales.len())]
    };
    let h = ((base.height() as f64 * scale).round() as usize).clamp(2, gray.height());
    let w = ((base.width() as f64 * scale).round() as usize).clamp(2, gray.width());
    let top = rng.random_range(0..=gray.height() - h);
    let left = rng.random_range(0..=gray.width() - w);
    Rect::new(top, left, h, w)
}

fn sample_negatives(
    rng: &mut ChaCha8Rng,
    batch: &[BatchImage],
    source: usize,
    base: Rect,
    template: HogTemplate,
    params: &EsvmParams,
) -> Result<Vec<HogDescriptor>> {
    let scales = &params.detection.scales;
    let others: Vec<usize> = (0..batch.len()).filter(|&i| i != source).collect();
    let own_count = if others.is_empty() {
        params.negatives
    } else {
        params.negatives / 2
    };
    let mut out = Vec::with_capacity(params.negatives);
    let src = &batch[source];
    for _ in 0..own_count {
        for _ in 0..NEGATIVE_TRIES {
            let r = random_window(rng, src.gray, base, scales);
            if src.exclude.iter().all(|e| e.iou(&r) <= NEGATIVE_MAX_IOU) {
                out.push(hog(&raster::crop(src.gray, r), template)?);
                break;
            }
        }
    }
    for _ in own_count..params.negatives {
        if others.is_empty() {
            break;
        }
        let img = &batch[others[rng.random_range(0..others.len())]];
        let r = random_window(rng, img.gray, base, scales);
        out.push(hog(&raster::crop(img.gray, r), template)?);
    }
    Ok(out)
}
