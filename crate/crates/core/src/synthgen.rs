//! Deterministic synthetic corpora: textured backgrounds with a few
//! garment-like shapes at label-specific canonical positions, plus exact
//! ground truth, contours and an oversegmentation that respects it.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ImageRecord, LabelId, Vocabulary, BACKGROUND, BACKGROUND_NAME};
use crate::error::{Error, Result};
use crate::raster::Grid;
use crate::seed::derive;

/// Rejection-sampling budget per shape.
pub const MAX_PLACEMENT_TRIES: usize = 100;
/// Superpixel pieces smaller than this are folded into a same-label neighbour.
pub const MIN_PIECE: usize = 6;
/// Pixels kept free between two shapes' bounding boxes.
const SHAPE_GAP: isize = 2;
/// Background within this Chebyshev distance of a shape forms one band
/// superpixel per shape.
const BAND: usize = 2;
/// Relative size jitter per shape.
const SIZE_JITTER: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
    /// Either, chosen per drawn shape.
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSpec {
    pub name: String,
    /// Canonical centre, normalised (row, col).
    pub center: [f64; 2],
    /// Standard deviation of the centre, normalised units.
    pub sigma: f64,
    /// Nominal (height, width) as fractions of the image.
    pub size: [f64; 2],
    /// Mean RGB colour.
    pub color: [f64; 3],
    /// Per-image colour jitter (RGB standard deviation).
    pub color_sigma: f64,
    pub shape: ShapeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Garment labels; background is implicit and always label 0.
    pub labels: Vec<LabelSpec>,
    pub background_color: [f64; 3],
    /// Amplitude of the diagonal background stripes.
    pub background_texture: f64,
    /// Inclusive range of shapes per image.
    pub shapes_per_image: [usize; 2],
    /// Pixel noise standard deviation as a fraction of 255, in `[0, 0.3]`.
    pub noise: f64,
    pub superpixel_cell: usize,
    pub superpixel_jitter: usize,
    pub seed: u64,
}

fn label(name: &str, center: [f64; 2], size: [f64; 2], color: [f64; 3]) -> LabelSpec {
    LabelSpec {
        name: name.into(),
        center,
        sigma: 0.03,
        size,
        color,
        color_sigma: 10.0,
        shape: ShapeKind::Any,
    }
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 96,
            height: 128,
            labels: vec![
                label("hat", [0.12, 0.5], [0.12, 0.32], [200.0, 40.0, 40.0]),
                label("coat", [0.38, 0.5], [0.27, 0.55], [40.0, 60.0, 190.0]),
                label("pants", [0.68, 0.5], [0.21, 0.42], [40.0, 150.0, 60.0]),
                label("shoes", [0.92, 0.5], [0.08, 0.42], [110.0, 70.0, 30.0]),
            ],
            background_color: [205.0, 200.0, 190.0],
            background_texture: 12.0,
            shapes_per_image: [1, 4],
            noise: 0.03,
            superpixel_cell: 12,
            superpixel_jitter: 3,
            seed: 42,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width < 8 || self.height < 8 {
            return bad(format!(
                "image size {}x{} is below 8x8",
                self.width, self.height
            ));
        }
        if !(0.0..=0.3).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 0.3]", self.noise));
        }
        let [lo, hi] = self.shapes_per_image;
        if lo < 1 || lo > hi || hi > self.labels.len() {
            return bad(format!(
                "shapes_per_image [{lo}, {hi}] must satisfy 1 <= min <= max <= {}",
                self.labels.len()
            ));
        }
        if self.superpixel_cell < 2 || 2 * self.superpixel_jitter >= self.superpixel_cell {
            return bad("superpixel jitter must be below half the cell size (cell >= 2)".into());
        }
        let mut names = BTreeSet::new();
        for l in &self.labels {
            if l.name == BACKGROUND_NAME || !names.insert(l.name.as_str()) {
                return bad(format!("label name `{}` is reserved or duplicated", l.name));
            }
            if !l.center.iter().all(|c| (0.0..=1.0).contains(c)) {
                return bad(format!(
                    "label `{}`: canonical centre outside [0,1]^2",
                    l.name
                ));
            }
            if !(l.sigma >= 0.0 && l.color_sigma >= 0.0) {
                return bad(format!("label `{}`: negative spread", l.name));
            }
            if !l.size.iter().all(|s| *s > 0.0 && *s <= 1.0) {
                return bad(format!(
                    "label `{}`: size fractions must lie in (0, 1]",
                    l.name
                ));
            }
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Result<Vocabulary> {
        let mut names = vec![BACKGROUND_NAME.to_string()];
        names.extend(self.labels.iter().map(|l| l.name.clone()));
        Vocabulary::new(names)
    }
}

#[derive(Debug, Clone, Copy)]
struct Shape {
    label: LabelId,
    ellipse: bool,
    /// Centre in pixel coordinates.
    cy: f64,
    cx: f64,
    /// Half extents in pixels.
    ry: f64,
    rx: f64,
}

impl Shape {
    fn contains(&self, row: usize, col: usize) -> bool {
        let dy = (row as f64 + 0.5 - self.cy) / self.ry;
        let dx = (col as f64 + 0.5 - self.cx) / self.rx;
        if self.ellipse {
            dy * dy + dx * dx <= 1.0
        } else {
            dy.abs() <= 1.0 && dx.abs() <= 1.0
        }
    }

    /// Pixel bounding box `(top, left, bottom, right)`, exclusive end.
    fn extent(&self) -> (isize, isize, isize, isize) {
        (
            (self.cy - self.ry).floor() as isize,
            (self.cx - self.rx).floor() as isize,
            (self.cy + self.ry).ceil() as isize,
            (self.cx + self.rx).ceil() as isize,
        )
    }
}

/// Generates `n_images` images. Image `i` depends only on the scene description and `i`.
pub fn generate(spec: &SceneSpec, n_images: usize) -> Result<Corpus> {
    spec.validate()?;
    if n_images == 0 {
        return Err(Error::Config("n_images must be at least 1".into()));
    }
    let vocabulary = spec.vocabulary()?;
    let images = (0..n_images)
        .into_par_iter()
        .map(|i| generate_image(spec, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus { vocabulary, images })
}

fn place_shapes(spec: &SceneSpec, rng: &mut ChaCha8Rng, image: usize) -> Result<Vec<Shape>> {
    let (h, w) = (spec.height as f64, spec.width as f64);
    let [lo, hi] = spec.shapes_per_image;
    let count = rng.random_range(lo..=hi);
    let chosen = rand::seq::index::sample(rng, spec.labels.len(), count).into_vec();
    let mut order = chosen;
    order.sort_unstable();
    let mut shapes: Vec<Shape> = Vec::with_capacity(count);
    for li in order {
        let ls = &spec.labels[li];
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let jitter = |rng: &mut ChaCha8Rng| 1.0 + rng.random_range(-SIZE_JITTER..=SIZE_JITTER);
            let ry = (ls.size[0] * h * jitter(rng) / 2.0).max(1.0);
            let rx = (ls.size[1] * w * jitter(rng) / 2.0).max(1.0);
            let (cy, cx) = if ls.sigma > 0.0 {
                let n = Normal::new(0.0, ls.sigma).expect("positive sigma");
                (ls.center[0] + n.sample(rng), ls.center[1] + n.sample(rng))
            } else {
                (ls.center[0], ls.center[1])
            };
            let ellipse = match ls.shape {
                ShapeKind::Rectangle => false,
                ShapeKind::Ellipse => true,
                ShapeKind::Any => rng.random_bool(0.5),
            };
            let s = Shape {
                label: (li + 1) as LabelId,
                ellipse,
                cy: cy * h,
                cx: cx * w,
                ry,
                rx,
            };
            let (t, l, b, r) = s.extent();
            if t < 0 || l < 0 || b > spec.height as isize || r > spec.width as isize {
                continue;
            }
            let clear = shapes.iter().all(|o| {
                let (ot, ol, ob, or) = o.extent();
                b + SHAPE_GAP <= ot
                    || ob + SHAPE_GAP <= t
                    || r + SHAPE_GAP <= ol
                    || or + SHAPE_GAP <= l
            });
            if clear {
                placed = Some(s);
                break;
            }
        }
        match placed {
            Some(s) => shapes.push(s),
            None => {
                return Err(Error::Generation(format!(
                    "image {image}: could not place `{}` after {MAX_PLACEMENT_TRIES} tries",
                    ls.name
                )))
            }
        }
    }
    Ok(shapes)
}

fn generate_image(spec: &SceneSpec, index: usize) -> Result<ImageRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, &[index as u64]));
    let shapes = place_shapes(spec, &mut rng, index)?;
    let (w, h) = (spec.width, spec.height);

    let gt = Grid::from_fn(w, h, |row, col| {
        shapes
            .iter()
            .find(|s| s.contains(row, col))
            .map_or(BACKGROUND, |s| s.label)
    });

    let mut palette = vec![spec.background_color; spec.labels.len() + 1];
    for s in &shapes {
        let ls = &spec.labels[s.label as usize - 1];
        let mut c = ls.color;
        if ls.color_sigma > 0.0 {
            let n = Normal::new(0.0, ls.color_sigma).expect("positive sigma");
            for v in &mut c {
                *v += n.sample(&mut rng);
            }
        }
        palette[s.label as usize] = c;
    }
    let noise =
        (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise * 255.0).expect("positive sigma"));
    let mut pixels = Grid::filled(w, h, [0u8; 3]);
    for row in 0..h {
        for col in 0..w {
            let l = *gt.get(row, col);
            let base = palette[l as usize];
            let stripe = if l == BACKGROUND {
                spec.background_texture * ((row + col) as f64 * std::f64::consts::TAU / 8.0).sin()
            } else {
                0.0
            };
            let mut px = [0u8; 3];
            for (ch, out) in px.iter_mut().enumerate() {
                let e = noise.map_or(0.0, |n| n.sample(&mut rng));
                *out = (base[ch] + stripe + e).round().clamp(0.0, 255.0) as u8;
            }
            pixels.set(row, col, px);
        }
    }

    // Border of each dilated shape: the pixels just outside it. Shapes never
    // touch, so same-label superpixels never share a contour pixel.
    let contour_map = Grid::from_fn(w, h, |row, col| {
        let l = *gt.get(row, col);
        gt.neighbors4(row, col).any(|(r, c)| *gt.get(r, c) > l)
    });
    let superpixel_map = oversegment(&gt, spec.superpixel_cell, spec.superpixel_jitter, &mut rng);
    let tags = gt.as_slice().iter().copied().collect();
    Ok(ImageRecord {
        id: format!("synth-{index:04}"),
        pixels,
        tags,
        superpixel_map,
        contour_map,
        ground_truth: Some(gt),
    })
}

/// Jittered-grid Voronoi cells, split into 4-connected single-label pieces;
/// tiny pieces merge into a same-label neighbour; ids follow raster order.
///
/// Background close to a shape is not cut by cell boundaries: it forms a
/// band around the shape, so the contour pixels only ever separate the shape
/// from its band.
fn oversegment(gt: &Grid<LabelId>, cell: usize, jitter: usize, rng: &mut ChaCha8Rng) -> Grid<u32> {
    let (w, h) = (gt.width(), gt.height());
    let (gy, gx) = (h.div_ceil(cell), w.div_ceil(cell));
    let j = jitter as f64;
    let centers: Vec<(f64, f64)> = (0..gy * gx)
        .map(|k| {
            let (i, c) = (k / gx, k % gx);
            let dy = if jitter > 0 {
                rng.random_range(-j..=j)
            } else {
                0.0
            };
            let dx = if jitter > 0 {
                rng.random_range(-j..=j)
            } else {
                0.0
            };
            (
                (i as f64 + 0.5) * cell as f64 + dy,
                (c as f64 + 0.5) * cell as f64 + dx,
            )
        })
        .collect();
    let cell_of = Grid::from_fn(w, h, |row, col| {
        let (ci, cj) = (row / cell, col / cell);
        let (py, px) = (row as f64 + 0.5, col as f64 + 0.5);
        let mut best = (f64::INFINITY, 0usize);
        for i in ci.saturating_sub(2)..(ci + 3).min(gy) {
            for jj in cj.saturating_sub(2)..(cj + 3).min(gx) {
                let k = i * gx + jj;
                let d = (centers[k].0 - py).powi(2) + (centers[k].1 - px).powi(2);
                if d < best.0 {
                    best = (d, k);
                }
            }
        }
        best.1
    });
    let zone = Grid::from_fn(w, h, |row, col| {
        if *gt.get(row, col) != BACKGROUND {
            return *cell_of.get(row, col);
        }
        let mut best: Option<(usize, LabelId)> = None;
        for r in row.saturating_sub(BAND)..(row + BAND + 1).min(h) {
            for c in col.saturating_sub(BAND)..(col + BAND + 1).min(w) {
                let l = *gt.get(r, c);
                if l != BACKGROUND {
                    let d = r.abs_diff(row).max(c.abs_diff(col));
                    if best.is_none_or(|b| (d, l) < b) {
                        best = Some((d, l));
                    }
                }
            }
        }
        best.map_or(*cell_of.get(row, col), |(_, l)| usize::MAX - l as usize)
    });

    // 4-connected pieces of constant (zone, label).
    let mut piece = Grid::filled(w, h, usize::MAX);
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for row in 0..h {
        for col in 0..w {
            if *piece.get(row, col) != usize::MAX {
                continue;
            }
            let id = sizes.len();
            let key = (*zone.get(row, col), *gt.get(row, col));
            let mut n = 0;
            piece.set(row, col, id);
            queue.push_back((row, col));
            while let Some((r, c)) = queue.pop_front() {
                n += 1;
                for (nr, nc) in gt.neighbors4(r, c) {
                    if *piece.get(nr, nc) == usize::MAX
                        && (*zone.get(nr, nc), *gt.get(nr, nc)) == key
                    {
                        piece.set(nr, nc, id);
                        queue.push_back((nr, nc));
                    }
                }
            }
            sizes.push(n);
        }
    }

    // Fold small pieces into the same-label neighbour sharing the longest border.
    let mut parent: Vec<usize> = (0..sizes.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for p in 0..sizes.len() {
        let root = find(&mut parent, p);
        if sizes[root] >= MIN_PIECE {
            continue;
        }
        let mut border: Vec<(usize, usize)> = Vec::new();
        for row in 0..h {
            for col in 0..w {
                if find(&mut parent, *piece.get(row, col)) != root {
                    continue;
                }
                for (nr, nc) in gt.neighbors4(row, col) {
                    let q = find(&mut parent, *piece.get(nr, nc));
                    if q != root && gt.get(nr, nc) == gt.get(row, col) {
                        match border.iter_mut().find(|(k, _)| *k == q) {
                            Some(e) => e.1 += 1,
                            None => border.push((q, 1)),
                        }
                    }
                }
            }
        }
        if let Some(&(q, _)) = border
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        {
            parent[root] = q;
            sizes[q] += sizes[root];
        }
    }

    let mut ids = vec![u32::MAX; sizes.len()];
    let mut next = 0u32;
    Grid::from_fn(w, h, |row, col| {
        let root = find(&mut parent, *piece.get(row, col));
        if ids[root] == u32::MAX {
            ids[root] = next;
            next += 1;
        }
        ids[root]
    })
}
