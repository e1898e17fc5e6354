//! Row-major 2-D rasters and the few resampling helpers the engine needs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    /// Wraps `data` (row-major). Returns `None` when the length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == width * height).then_some(Grid {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.width + col]
    }

    #[inline]
    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut T {
        &mut self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// 4-neighbours of `(row, col)` that lie inside the grid.
    pub fn neighbors4(&self, row: usize, col: usize) -> impl Iterator<Item = (usize, usize)> {
        let (h, w) = (self.height, self.width);
        let up = (row > 0).then(|| (row - 1, col));
        let down = (row + 1 < h).then(|| (row + 1, col));
        let left = (col > 0).then(|| (row, col - 1));
        let right = (col + 1 < w).then(|| (row, col + 1));
        [up, down, left, right].into_iter().flatten()
    }
}

/// Axis-aligned pixel rectangle; `bottom` and `right` are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl Rect {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Rect {
            top,
            left,
            bottom: top + height,
            right: left + width,
        }
    }

    pub fn height(&self) -> usize {
        self.bottom - self.top
    }

    pub fn width(&self) -> usize {
        self.right - self.left
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }

    pub fn intersection_area(&self, other: &Rect) -> usize {
        let top = self.top.max(other.top);
        let left = self.left.max(other.left);
        let bottom = self.bottom.min(other.bottom);
        let right = self.right.min(other.right);
        if bottom > top && right > left {
            (bottom - top) * (right - left)
        } else {
            0
        }
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Smallest rectangle containing every `true` cell, or `None` for an empty mask.
    pub fn bounding(mask: &Grid<bool>) -> Option<Rect> {
        let (mut top, mut left, mut bottom, mut right) = (usize::MAX, usize::MAX, 0, 0);
        for row in 0..mask.height() {
            for col in 0..mask.width() {
                if *mask.get(row, col) {
                    top = top.min(row);
                    left = left.min(col);
                    bottom = bottom.max(row + 1);
                    right = right.max(col + 1);
                }
            }
        }
        (top != usize::MAX).then_some(Rect {
            top,
            left,
            bottom,
            right,
        })
    }
}

/// Luma (BT.601) of an RGB raster, in `[0, 255]`.
pub fn grayscale(pixels: &Grid<[u8; 3]>) -> Grid<f64> {
    pixels.map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
}

/// Extracts `rect` from `src`.
pub fn crop<T: Clone>(src: &Grid<T>, rect: Rect) -> Grid<T> {
    Grid::from_fn(rect.width(), rect.height(), |r, c| {
        src.get(rect.top + r, rect.left + c).clone()
    })
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_bilinear(src: &Grid<f64>, width: usize, height: usize) -> Grid<f64> {
    if src.width() == width && src.height() == height {
        return src.clone();
    }
    let sy = src.height() as f64 / height as f64;
    let sx = src.width() as f64 / width as f64;
    let max_r = src.height() - 1;
    let max_c = src.width() - 1;
    Grid::from_fn(width, height, |r, c| {
        let fy = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, max_r as f64);
        let fx = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, max_c as f64);
        let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(max_r), (x0 + 1).min(max_c));
        let (ty, tx) = (fy - y0 as f64, fx - x0 as f64);
        let top = src.get(y0, x0) * (1.0 - tx) + src.get(y0, x1) * tx;
        let bottom = src.get(y1, x0) * (1.0 - tx) + src.get(y1, x1) * tx;
        top * (1.0 - ty) + bottom * ty
    })
}

/// Nearest-neighbour resampling, used for binary masks.
pub fn resize_nearest<T: Clone>(src: &Grid<T>, width: usize, height: usize) -> Grid<T> {
    let sy = src.height() as f64 / height as f64;
    let sx = src.width() as f64 / width as f64;
    Grid::from_fn(width, height, |r, c| {
        let y = (((r as f64 + 0.5) * sy) as usize).min(src.height() - 1);
        let x = (((c as f64 + 0.5) * sx) as usize).min(src.width() - 1);
        src.get(y, x).clone()
    })
}
