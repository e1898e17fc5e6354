use serde::{Deserialize, Serialize};

use super::Exemplar;
use crate::corpus::PropagationRecord;
use crate::features::{HogMap, HOG_CELL};
use crate::raster::{self, Grid, Rect};

/// Windows overlapping a stronger one by more than this are suppressed.
pub const NMS_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    pub stride: usize,
    pub scales: Vec<f64>,
    pub k_top: usize,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            stride: 8,
            scales: vec![1.0, 1.0 / 1.25, 1.25],
            k_top: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionWindow {
    pub image: usize,
    /// Column of the top-left corner.
    pub x: usize,
    /// Row of the top-left corner.
    pub y: usize,
    pub width: usize,
    pub height: usize,
    pub raw_score: f64,
    pub calibrated: f64,
}

impl DetectionWindow {
    pub fn rect(&self) -> Rect {
        Rect::new(self.y, self.x, self.height, self.width)
    }
}

/// Every window of `exemplar` over one grayscale image, before suppression.
///
/// At each scale the window is the source box scaled by that factor; the
/// image is resampled so the window maps onto the template exactly, and
/// windows step over the resampled HOG cell grid.
pub fn scan(
    exemplar: &Exemplar,
    image: usize,
    gray: &Grid<f64>,
    params: &DetectionParams,
) -> Vec<DetectionWindow> {
    let (h, w) = (gray.height(), gray.width());
    let t = exemplar.template;
    let step_cells = (params.stride as f64 / HOG_CELL as f64).round().max(1.0) as usize;
    let mut out = Vec::new();
    for &scale in &params.scales {
        let win_h = ((exemplar.source_rect.height() as f64 * scale).round() as usize).clamp(2, h);
        let win_w = ((exemplar.source_rect.width() as f64 * scale).round() as usize).clamp(2, w);
        let ry = t.pixel_height() as f64 / win_h as f64;
        let rx = t.pixel_width() as f64 / win_w as f64;
        let (rh, rw) = (
            (h as f64 * ry).round() as usize,
            (w as f64 * rx).round() as usize,
        );
        if rh < t.pixel_height() || rw < t.pixel_width() {
            continue;
        }
        let map = HogMap::new(&raster::resize_bilinear(gray, rw, rh));
        let mut cy = 0;
        while map.fits(cy, 0, t) {
            let mut cx = 0;
            while map.fits(cy, cx, t) {
                let f = map.window(cy, cx, t);
                let raw = exemplar.raw_score(&f.values);
                let y = (((cy * HOG_CELL) as f64 / ry).round() as usize).min(h - win_h);
                let x = (((cx * HOG_CELL) as f64 / rx).round() as usize).min(w - win_w);
                out.push(DetectionWindow {
                    image,
                    x,
                    y,
                    width: win_w,
                    height: win_h,
                    raw_score: raw,
                    calibrated: exemplar.calibration.score(raw),
                });
                cx += step_cells;
            }
            cy += step_cells;
        }
    }
    out
}

fn order(a: &DetectionWindow, b: &DetectionWindow) -> std::cmp::Ordering {
    b.calibrated
        .total_cmp(&a.calibrated)
        .then(b.raw_score.total_cmp(&a.raw_score))
        .then(a.image.cmp(&b.image))
        .then(a.y.cmp(&b.y))
        .then(a.x.cmp(&b.x))
        .then(a.height.cmp(&b.height))
}

/// Greedy non-maximum suppression within each image; output best first.
pub fn non_maximum_suppression(mut windows: Vec<DetectionWindow>) -> Vec<DetectionWindow> {
    windows.sort_by(order);
    let mut kept: Vec<DetectionWindow> = Vec::new();
    for w in windows {
        let r = w.rect();
        if kept
            .iter()
            .all(|k| k.image != w.image || k.rect().iou(&r) <= NMS_IOU)
        {
            kept.push(w);
        }
    }
    kept
}

/// The `k_top` best suppressed detections over all `images`, each as a
/// propagation carrying the exemplar mask resampled to the window.
pub fn propagate(
    exemplar: &Exemplar,
    images: &[(usize, &Grid<f64>)],
    params: &DetectionParams,
) -> Vec<PropagationRecord> {
    if params.k_top == 0 {
        return Vec::new();
    }
    let mut all = Vec::new();
    for &(index, gray) in images {
        let kept = non_maximum_suppression(scan(exemplar, index, gray, params));
        all.extend(kept.into_iter().take(params.k_top));
    }
    all.sort_by(order);
    all.truncate(params.k_top);
    all.into_iter()
        .map(|d| PropagationRecord {
            source_exemplar: exemplar.id.clone(),
            target_image: d.image,
            x: d.x,
            y: d.y,
            mask: raster::resize_nearest(&exemplar.mask, d.width, d.height),
            score: d.calibrated,
        })
        .collect()
}
