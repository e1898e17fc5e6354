//! Appearance features: the 40-bin colour/gradient histogram compared with
//! chi-square, and HOG descriptors for the exemplar detectors.

use std::f64::consts::PI;

use crate::corpus::ImageRecord;
use crate::error::{Error, Result};
use crate::raster::{self, Grid};

pub const COLOR_BINS_PER_CHANNEL: usize = 8;
pub const COLOR_BINS: usize = 3 * COLOR_BINS_PER_CHANNEL;
pub const GRADIENT_BINS: usize = 16;
pub const HISTOGRAM_BINS: usize = COLOR_BINS + GRADIENT_BINS;

/// 24 colour bins (8 per RGB channel) followed by 16 magnitude-weighted
/// orientation bins. Each half sums to 0.5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Histogram40 {
    pub values: [f64; HISTOGRAM_BINS],
}

impl Histogram40 {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Builds a histogram from raw bins, renormalising each half to 0.5.
    /// A half with zero mass becomes uniform.
    pub fn from_raw(raw: &[f64; HISTOGRAM_BINS]) -> Self {
        let mut values = *raw;
        normalize_half(&mut values[..COLOR_BINS]);
        normalize_half(&mut values[COLOR_BINS..]);
        Histogram40 { values }
    }
}

fn normalize_half(bins: &mut [f64]) {
    let total: f64 = bins.iter().sum();
    if total > 0.0 {
        bins.iter_mut().for_each(|b| *b *= 0.5 / total);
    } else {
        let u = 0.5 / bins.len() as f64;
        bins.iter_mut().for_each(|b| *b = u);
    }
}

/// Per-image gradient field reused by every region histogram of that image.
#[derive(Debug, Clone)]
pub struct ImageFeatures {
    gray: Grid<f64>,
    magnitude: Vec<f64>,
    orientation_bin: Vec<u8>,
}

impl ImageFeatures {
    pub fn new(image: &ImageRecord) -> Self {
        let gray = raster::grayscale(&image.pixels);
        let (gx, gy) = central_gradients(&gray);
        let mut magnitude = Vec::with_capacity(gray.len());
        let mut orientation_bin = Vec::with_capacity(gray.len());
        for (&x, &y) in gx.iter().zip(&gy) {
            magnitude.push((x * x + y * y).sqrt());
            let theta = y.atan2(x) + PI; // [0, 2π]
            let bin = ((theta / (2.0 * PI)) * GRADIENT_BINS as f64) as usize;
            orientation_bin.push((bin % GRADIENT_BINS) as u8);
        }
        ImageFeatures {
            gray,
            magnitude,
            orientation_bin,
        }
    }

    pub fn gray(&self) -> &Grid<f64> {
        &self.gray
    }

    /// Histogram of the pixels under `mask`; see [`region_histogram`].
    pub fn histogram(&self, image: &ImageRecord, mask: &Grid<bool>) -> Result<Histogram40> {
        if !mask.same_shape(&image.pixels) {
            return Err(Error::malformed("mask and image dimensions differ"));
        }
        self.histogram_of(
            image,
            mask.as_slice()
                .iter()
                .enumerate()
                .filter_map(|(i, &m)| m.then_some(i)),
        )
    }

    /// Histogram over an explicit list of flat pixel indices.
    pub fn histogram_of(
        &self,
        image: &ImageRecord,
        pixels: impl IntoIterator<Item = usize>,
    ) -> Result<Histogram40> {
        let mut raw = [0.0; HISTOGRAM_BINS];
        let mut count = 0usize;
        let rgb = image.pixels.as_slice();
        for p in pixels {
            count += 1;
            for (ch, &v) in rgb[p].iter().enumerate() {
                raw[ch * COLOR_BINS_PER_CHANNEL + v as usize / 32] += 1.0;
            }
            raw[COLOR_BINS + self.orientation_bin[p] as usize] += self.magnitude[p];
        }
        if count == 0 {
            return Err(Error::DegenerateRegion("empty region mask".into()));
        }
        Ok(Histogram40::from_raw(&raw))
    }
}

/// The 40-bin appearance feature of the masked region.
pub fn region_histogram(image: &ImageRecord, mask: &Grid<bool>) -> Result<Histogram40> {
    ImageFeatures::new(image).histogram(image, mask)
}

/// `½ Σ (a−b)²/(a+b)`, skipping bins where both are zero. In `[0, 1]` for
/// normalised inputs.
pub fn chi_square(a: &Histogram40, b: &Histogram40) -> f64 {
    chi_square_slices(&a.values, &b.values)
}

pub(crate) fn chi_square_slices(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let s = x + y;
            if s > 0.0 {
                (x - y) * (x - y) / s
            } else {
                0.0
            }
        })
        .sum::<f64>()
}

/// Central differences with replicated borders.
fn central_gradients(gray: &Grid<f64>) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = (gray.height(), gray.width());
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    let g = gray.as_slice();
    for r in 0..h {
        let up = r.saturating_sub(1);
        let down = (r + 1).min(h - 1);
        for c in 0..w {
            let left = c.saturating_sub(1);
            let right = (c + 1).min(w - 1);
            gx[r * w + c] = g[r * w + right] - g[r * w + left];
            gy[r * w + c] = g[down * w + c] - g[up * w + c];
        }
    }
    (gx, gy)
}

pub const HOG_CELL: usize = 8;
pub const HOG_BINS: usize = 9;
pub const HOG_MAX_CELLS: usize = 8;
const HOG_BLOCK_LEN: usize = 4 * HOG_BINS;
const HOG_CLIP: f64 = 0.2;
const HOG_EPS: f64 = 1e-3;

/// HOG cell grid of a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct HogTemplate {
    pub cells_y: usize,
    pub cells_x: usize,
}

impl HogTemplate {
    /// Nearest cell grid to the given aspect ratio with the longer side at
    /// [`HOG_MAX_CELLS`] and the shorter side at least 2.
    pub fn for_size(height: usize, width: usize) -> Self {
        let (long, short) = if height >= width {
            (height, width)
        } else {
            (width, height)
        };
        let s = ((HOG_MAX_CELLS as f64 * short as f64 / long.max(1) as f64).round() as usize)
            .clamp(2, HOG_MAX_CELLS);
        if height >= width {
            HogTemplate {
                cells_y: HOG_MAX_CELLS,
                cells_x: s,
            }
        } else {
            HogTemplate {
                cells_y: s,
                cells_x: HOG_MAX_CELLS,
            }
        }
    }

    pub fn pixel_height(&self) -> usize {
        self.cells_y * HOG_CELL
    }

    pub fn pixel_width(&self) -> usize {
        self.cells_x * HOG_CELL
    }

    /// `(cells_y − 1)(cells_x − 1) · 36`.
    pub fn descriptor_len(&self) -> usize {
        self.cells_y.saturating_sub(1) * self.cells_x.saturating_sub(1) * HOG_BLOCK_LEN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor {
    pub values: Vec<f64>,
}

impl HogDescriptor {
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.values.iter().zip(w).map(|(a, b)| a * b).sum()
    }
}

/// HOG of a grayscale patch: bilinear resample to the template's pixel
/// size, 9 unsigned orientation bins per 8×8 cell, 2×2-cell blocks with
/// L2-hys normalisation.
pub fn hog(patch: &Grid<f64>, template: HogTemplate) -> Result<HogDescriptor> {
    if template.cells_y < 2 || template.cells_x < 2 {
        return Err(Error::PatchTooSmall(format!(
            "template {}x{} cells, need at least 2x2",
            template.cells_y, template.cells_x
        )));
    }
    if patch.width() < 2 || patch.height() < 2 {
        return Err(Error::PatchTooSmall(format!(
            "patch {}x{} pixels",
            patch.height(),
            patch.width()
        )));
    }
    let sized = raster::resize_bilinear(patch, template.pixel_width(), template.pixel_height());
    Ok(HogMap::new(&sized).window(0, 0, template))
}

/// Block-normalised HOG over a whole raster; windows aligned to the cell
/// grid read their descriptor straight from it.
#[derive(Debug, Clone)]
pub struct HogMap {
    pub cells_y: usize,
    pub cells_x: usize,
    /// `(cells_y − 1) × (cells_x − 1)` normalised blocks, row-major.
    blocks: Vec<f64>,
}

impl HogMap {
    /// Pixels past the last full cell are ignored.
    pub fn new(gray: &Grid<f64>) -> Self {
        let (gx, gy) = central_gradients(gray);
        let w = gray.width();
        let (cy, cx) = (gray.height() / HOG_CELL, w / HOG_CELL);
        let mut cells = vec![0.0; cy * cx * HOG_BINS];
        for (i, (&x, &y)) in gx.iter().zip(&gy).enumerate() {
            let (r, c) = (i / w, i % w);
            if r >= cy * HOG_CELL || c >= cx * HOG_CELL {
                continue;
            }
            let mag = (x * x + y * y).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut deg = y.atan2(x).to_degrees();
            if deg < 0.0 {
                deg += 180.0;
            }
            if deg >= 180.0 {
                deg -= 180.0;
            }
            let bin = ((deg / (180.0 / HOG_BINS as f64)) as usize).min(HOG_BINS - 1);
            let cell = (r / HOG_CELL) * cx + c / HOG_CELL;
            cells[cell * HOG_BINS + bin] += mag;
        }
        let (by_n, bx_n) = (cy.saturating_sub(1), cx.saturating_sub(1));
        let mut blocks = Vec::with_capacity(by_n * bx_n * HOG_BLOCK_LEN);
        let mut block = [0.0; HOG_BLOCK_LEN];
        for by in 0..by_n {
            for bx in 0..bx_n {
                for (k, (dy, dx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                    let cell = (by + dy) * cx + bx + dx;
                    block[k * HOG_BINS..(k + 1) * HOG_BINS]
                        .copy_from_slice(&cells[cell * HOG_BINS..(cell + 1) * HOG_BINS]);
                }
                l2_hys(&mut block);
                blocks.extend_from_slice(&block);
            }
        }
        HogMap {
            cells_y: cy,
            cells_x: cx,
            blocks,
        }
    }

    /// Whether a template placed at cell `(cell_row, cell_col)` fits.
    pub fn fits(&self, cell_row: usize, cell_col: usize, template: HogTemplate) -> bool {
        cell_row + template.cells_y <= self.cells_y && cell_col + template.cells_x <= self.cells_x
    }

    /// Descriptor of the window whose top-left cell is `(cell_row, cell_col)`.
    ///
    /// # Panics
    /// If the window does not fit (see [`HogMap::fits`]).
    pub fn window(&self, cell_row: usize, cell_col: usize, template: HogTemplate) -> HogDescriptor {
        assert!(
            self.fits(cell_row, cell_col, template),
            "window outside HOG map"
        );
        let bx_n = self.cells_x - 1;
        let mut values = Vec::with_capacity(template.descriptor_len());
        for by in 0..template.cells_y - 1 {
            let row = cell_row + by;
            let first = row * bx_n + cell_col;
            let last = first + template.cells_x - 1;
            values.extend_from_slice(&self.blocks[first * HOG_BLOCK_LEN..last * HOG_BLOCK_LEN]);
        }
        HogDescriptor { values }
    }
}

fn l2_hys(v: &mut [f64]) {
    let scale = |v: &mut [f64]| {
        let norm = (v.iter().map(|x| x * x).sum::<f64>() + HOG_EPS * HOG_EPS).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    };
    scale(v);
    v.iter_mut().for_each(|x| *x = x.min(HOG_CLIP));
    scale(v);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::image_from_map;

    #[test]
    fn hog_map_window_matches_direct_descriptor() {
        let gray = Grid::from_fn(32, 24, |r, c| ((r * 7 + c * 13) % 17) as f64 * 9.0);
        let t = HogTemplate {
            cells_y: 3,
            cells_x: 4,
        };
        let map = HogMap::new(&gray);
        assert_eq!((map.cells_y, map.cells_x), (3, 4));
        assert_eq!(map.window(0, 0, t), hog(&gray, t).unwrap());
        let small = HogTemplate {
            cells_y: 2,
            cells_x: 2,
        };
        assert!(map.fits(1, 2, small));
        assert!(!map.fits(2, 2, small));
        assert_eq!(map.window(1, 2, small).values.len(), small.descriptor_len());
    }

    fn unit(i: usize) -> Histogram40 {
        let mut values = [0.0; HISTOGRAM_BINS];
        values[i] = 1.0;
        Histogram40 { values }
    }

    #[test]
    fn uniform_gray_region() {
        let img = image_from_map(vec![vec![0; 6]; 4]);
        let mask = Grid::filled(6, 4, true);
        let h = region_histogram(&img, &mask).unwrap();
        // 128 / 32 = bin 4 in every channel
        for ch in 0..3 {
            assert!((h.values[ch * 8 + 4] - 0.5 / 3.0).abs() < 1e-12);
        }
        for g in 0..GRADIENT_BINS {
            assert!((h.values[COLOR_BINS + g] - 0.5 / 16.0).abs() < 1e-12);
        }
        assert!((h.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn black_white_split_region() {
        let mut img = image_from_map(vec![vec![0; 4]; 4]);
        img.pixels = Grid::from_fn(4, 4, |_, c| if c < 2 { [0, 0, 0] } else { [255, 255, 255] });
        let h = region_histogram(&img, &Grid::filled(4, 4, true)).unwrap();
        for ch in 0..3 {
            assert!((h.values[ch * 8] - 0.25 / 3.0).abs() < 1e-12);
            assert!((h.values[ch * 8 + 7] - 0.25 / 3.0).abs() < 1e-12);
        }
        let color: f64 = h.values[..COLOR_BINS].iter().sum();
        assert!((color - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_is_degenerate() {
        let img = image_from_map(vec![vec![0; 3]; 3]);
        let r = region_histogram(&img, &Grid::filled(3, 3, false));
        assert!(matches!(r, Err(Error::DegenerateRegion(_))));
    }

    #[test]
    fn chi_square_examples() {
        let a = unit(0);
        let b = unit(1);
        assert_eq!(chi_square(&a, &a), 0.0);
        assert!((chi_square(&a, &b) - 1.0).abs() < 1e-15);
        assert_eq!(chi_square(&a, &b), chi_square(&b, &a));
    }

    #[test]
    fn hog_constant_patch_is_zero() {
        let d = hog(
            &Grid::filled(20, 30, 77.0),
            HogTemplate {
                cells_y: 4,
                cells_x: 4,
            },
        )
        .unwrap();
        assert_eq!(d.values.len(), 324);
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hog_vertical_edge_uses_horizontal_gradient_bin() {
        let patch = Grid::from_fn(16, 16, |_, c| if c < 8 { 0.0 } else { 255.0 });
        let t = HogTemplate {
            cells_y: 2,
            cells_x: 2,
        };
        let d = hog(&patch, t).unwrap();
        assert_eq!(d.values.len(), 36);
        for cell in 0..4 {
            let bins = &d.values[cell * 9..cell * 9 + 9];
            let total: f64 = bins.iter().sum();
            assert!(total > 0.0);
            assert!(bins[0] >= total - 1e-12, "cell {cell}: {bins:?}");
        }
    }

    #[test]
    fn hog_patch_too_small() {
        let p = Grid::filled(16, 16, 1.0);
        assert!(matches!(
            hog(
                &p,
                HogTemplate {
                    cells_y: 1,
                    cells_x: 4
                }
            ),
            Err(Error::PatchTooSmall(_))
        ));
        assert!(matches!(
            hog(
                &Grid::filled(1, 1, 0.0),
                HogTemplate {
                    cells_y: 2,
                    cells_x: 2
                }
            ),
            Err(Error::PatchTooSmall(_))
        ));
    }

    #[test]
    fn template_aspect() {
        assert_eq!(
            HogTemplate::for_size(40, 20),
            HogTemplate {
                cells_y: 8,
                cells_x: 4
            }
        );
        assert_eq!(
            HogTemplate::for_size(10, 100),
            HogTemplate {
                cells_y: 2,
                cells_x: 8
            }
        );
        assert_eq!(
            HogTemplate {
                cells_y: 4,
                cells_x: 4
            }
            .descriptor_len(),
            324
        );
    }
}
