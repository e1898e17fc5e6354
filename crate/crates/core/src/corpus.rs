//! Corpus data model shared by both phases.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Grid, Rect};

pub type LabelId = u16;

/// Label 0 is reserved for background.
pub const BACKGROUND: LabelId = 0;
pub const BACKGROUND_NAME: &str = "background";

/// Ordered corpus-level label list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.first().map(String::as_str) != Some(BACKGROUND_NAME) {
            return Err(Error::Config(format!(
                "label vocabulary must start with `{BACKGROUND_NAME}`"
            )));
        }
        let unique: BTreeSet<_> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::Config("duplicate label in vocabulary".into()));
        }
        if names.len() > LabelId::MAX as usize {
            return Err(Error::Config("vocabulary too large".into()));
        }
        Ok(Vocabulary { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<LabelId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| i as LabelId)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn name(&self, id: LabelId) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> {
        (0..self.names.len()).map(|i| i as LabelId)
    }
}

/// One tagged image with its precomputed oversegmentation and contours.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub pixels: Grid<[u8; 3]>,
    pub tags: BTreeSet<LabelId>,
    pub superpixel_map: Grid<u32>,
    pub contour_map: Grid<bool>,
    pub ground_truth: Option<Grid<LabelId>>,
}

impl ImageRecord {
    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Labels a region of this image may take: its tags plus background.
    pub fn candidate_labels(&self) -> Vec<LabelId> {
        let mut set = self.tags.clone();
        set.insert(BACKGROUND);
        set.into_iter().collect()
    }

    /// Checks every structural invariant: matching dimensions, superpixel
    /// ids contiguous and 4-connected, labels inside the vocabulary.
    pub fn validate(&self, vocabulary: &Vocabulary) -> Result<()> {
        let ctx = |m: String| Error::malformed(format!("image `{}`: {m}", self.id));
        if self.pixels.is_empty() {
            return Err(ctx("empty raster".into()));
        }
        if !self.pixels.same_shape(&self.superpixel_map)
            || !self.pixels.same_shape(&self.contour_map)
        {
            return Err(ctx("raster dimensions differ".into()));
        }
        if let Some(gt) = &self.ground_truth {
            if !self.pixels.same_shape(gt) {
                return Err(ctx("ground truth dimensions differ".into()));
            }
            if gt
                .as_slice()
                .iter()
                .any(|&l| l as usize >= vocabulary.len())
            {
                return Err(ctx("ground truth label outside vocabulary".into()));
            }
        }
        if self.tags.iter().any(|&l| l as usize >= vocabulary.len()) {
            return Err(ctx("tag outside vocabulary".into()));
        }
        superpixels_of(self).map_err(|e| ctx(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocabulary: Vocabulary,
    pub images: Vec<ImageRecord>,
}

impl Corpus {
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for img in &self.images {
            if !ids.insert(img.id.as_str()) {
                return Err(Error::malformed(format!("duplicate image id `{}`", img.id)));
            }
            img.validate(&self.vocabulary)?;
        }
        Ok(())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.images.iter().position(|i| i.id == id)
    }

    /// Sub-corpus holding the given images, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            vocabulary: self.vocabulary.clone(),
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
        }
    }
}

/// Normalised pixel-centre coordinate `((row + 0.5) / H, (col + 0.5) / W)`.
#[inline]
pub fn normalized(row: usize, col: usize, height: usize, width: usize) -> (f64, f64) {
    (
        (row as f64 + 0.5) / height as f64,
        (col as f64 + 0.5) / width as f64,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Superpixel {
    pub id: usize,
    pub pixel_count: usize,
    /// Normalised (row, col).
    pub centroid: (f64, f64),
    pub bbox: Rect,
}

/// Derives one [`Superpixel`] per map value, ids ascending.
///
/// Fails when the map values are not exactly `0..M` or when a superpixel
/// is not 4-connected.
pub fn superpixels_of(image: &ImageRecord) -> Result<Vec<Superpixel>> {
    let map = &image.superpixel_map;
    let (h, w) = (map.height(), map.width());
    if map.is_empty() {
        return Err(Error::malformed("empty superpixel map"));
    }
    let max = *map.as_slice().iter().max().expect("nonempty") as usize;
    let mut count = vec![0usize; max + 1];
    let mut sum_r = vec![0f64; max + 1];
    let mut sum_c = vec![0f64; max + 1];
    let mut bbox: Vec<Option<Rect>> = vec![None; max + 1];
    for row in 0..h {
        for col in 0..w {
            let s = *map.get(row, col) as usize;
            count[s] += 1;
            let (nr, nc) = normalized(row, col, h, w);
            sum_r[s] += nr;
            sum_c[s] += nc;
            let b = bbox[s].get_or_insert(Rect::new(row, col, 1, 1));
            b.top = b.top.min(row);
            b.left = b.left.min(col);
            b.bottom = b.bottom.max(row + 1);
            b.right = b.right.max(col + 1);
        }
    }
    if let Some(gap) = count.iter().position(|&c| c == 0) {
        return Err(Error::malformed(format!(
            "superpixel ids are not contiguous: id {gap} is missing below max {max}"
        )));
    }
    check_connected(map, &count)?;
    Ok((0..=max)
        .map(|s| Superpixel {
            id: s,
            pixel_count: count[s],
            centroid: (sum_r[s] / count[s] as f64, sum_c[s] / count[s] as f64),
            bbox: bbox[s].expect("nonempty"),
        })
        .collect())
}

fn check_connected(map: &Grid<u32>, count: &[usize]) -> Result<()> {
    let mut seen = Grid::filled(map.width(), map.height(), false);
    let mut visited_ids = vec![false; count.len()];
    let mut queue = VecDeque::new();
    for row in 0..map.height() {
        for col in 0..map.width() {
            if *seen.get(row, col) {
                continue;
            }
            let s = *map.get(row, col);
            if visited_ids[s as usize] {
                return Err(Error::malformed(format!(
                    "superpixel {s} is not 4-connected"
                )));
            }
            visited_ids[s as usize] = true;
            seen.set(row, col, true);
            queue.push_back((row, col));
            while let Some((r, c)) = queue.pop_front() {
                for (nr, nc) in map.neighbors4(r, c) {
                    if !*seen.get(nr, nc) && *map.get(nr, nc) == s {
                        seen.set(nr, nc, true);
                        queue.push_back((nr, nc));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Superpixels of one image together with their adjacency and pixel lists.
#[derive(Debug, Clone)]
pub struct SuperpixelGraph {
    pub superpixels: Vec<Superpixel>,
    /// Undirected 4-adjacency, `u < v`, sorted, no duplicates.
    pub edges: Vec<(usize, usize)>,
    /// Flat pixel indices (`row * W + col`) per superpixel, ascending.
    pub pixels: Vec<Vec<usize>>,
    pub width: usize,
    pub height: usize,
}

impl SuperpixelGraph {
    pub fn build(image: &ImageRecord) -> Result<Self> {
        let superpixels = superpixels_of(image)?;
        let map = &image.superpixel_map;
        let (h, w) = (map.height(), map.width());
        let mut pixels = vec![Vec::new(); superpixels.len()];
        let mut edges = BTreeSet::new();
        for row in 0..h {
            for col in 0..w {
                let s = *map.get(row, col) as usize;
                pixels[s].push(row * w + col);
                for (nr, nc) in [(row + 1, col), (row, col + 1)] {
                    if nr < h && nc < w {
                        let t = *map.get(nr, nc) as usize;
                        if t != s {
                            edges.insert((s.min(t), s.max(t)));
                        }
                    }
                }
            }
        }
        Ok(SuperpixelGraph {
            superpixels,
            edges: edges.into_iter().collect(),
            pixels,
            width: w,
            height: h,
        })
    }

    pub fn len(&self) -> usize {
        self.superpixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.superpixels.is_empty()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Builds the regions of `partition`; `image_index` is recorded in each id.
    pub fn regions(&self, image_index: usize, partition: &Partition) -> Result<Vec<Region>> {
        if partition.assignment.len() != self.len() {
            return Err(Error::malformed(format!(
                "partition covers {} superpixels, image has {}",
                partition.assignment.len(),
                self.len()
            )));
        }
        let (h, w) = (self.height, self.width);
        let total = (h * w) as f64;
        let mut regions: Vec<Region> = (0..partition.region_count)
            .map(|k| Region {
                id: RegionId {
                    image: image_index,
                    index: k,
                },
                superpixels: Vec::new(),
                mask: Grid::filled(w, h, false),
                centroid: (0.0, 0.0),
                area_fraction: 0.0,
                pixel_count: 0,
                bbox: Rect::new(0, 0, 0, 0),
                label: None,
            })
            .collect();
        for (s, &k) in partition.assignment.iter().enumerate() {
            let region = &mut regions[k];
            region.superpixels.push(s);
            let sp = &self.superpixels[s];
            let n = sp.pixel_count as f64;
            region.centroid.0 += sp.centroid.0 * n;
            region.centroid.1 += sp.centroid.1 * n;
            region.pixel_count += sp.pixel_count;
            for &p in &self.pixels[s] {
                region.mask.as_mut_slice()[p] = true;
            }
        }
        for region in &mut regions {
            let n = region.pixel_count as f64;
            region.centroid = (region.centroid.0 / n, region.centroid.1 / n);
            region.area_fraction = n / total;
            region.bbox = Rect::bounding(&region.mask).expect("regions are nonempty");
        }
        Ok(regions)
    }
}

/// Assignment of superpixels to regions `0..K`.
///
/// Stored in canonical form: region indices appear in order of first use
/// when scanning superpixels by id, so equal groupings compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub assignment: Vec<usize>,
    pub region_count: usize,
}

impl Partition {
    /// Canonicalises an arbitrary labelling of superpixels.
    pub fn from_assignment(raw: &[usize]) -> Self {
        let mut remap = BTreeMap::new();
        let assignment = raw
            .iter()
            .map(|&r| {
                let next = remap.len();
                *remap.entry(r).or_insert(next)
            })
            .collect();
        Partition {
            assignment,
            region_count: remap.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            assignment: (0..n).collect(),
            region_count: n,
        }
    }

    pub fn single(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            region_count: usize::from(n > 0),
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn same_region(&self, u: usize, v: usize) -> bool {
        self.assignment[u] == self.assignment[v]
    }

    /// Per-edge merge indicators (`true` iff the endpoints share a region).
    pub fn to_edge_labels(&self, edges: &[(usize, usize)]) -> Vec<bool> {
        edges.iter().map(|&(u, v)| self.same_region(u, v)).collect()
    }

    /// Connected components of the merged edges.
    pub fn from_edge_labels(n: usize, edges: &[(usize, usize)], merged: &[bool]) -> Self {
        let mut dsu = DisjointSets::new(n);
        for (&(u, v), &m) in edges.iter().zip(merged) {
            if m {
                dsu.union(u, v);
            }
        }
        let roots: Vec<usize> = (0..n).map(|i| dsu.find(i)).collect();
        Partition::from_assignment(&roots)
    }

    /// Splits every region into its connected pieces under `edges`.
    pub fn connected_refinement(&self, edges: &[(usize, usize)]) -> Self {
        let merged = self.to_edge_labels(edges);
        Partition::from_edge_labels(self.len(), edges, &merged)
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.region_count];
        for (s, &k) in self.assignment.iter().enumerate() {
            out[k].push(s);
        }
        out
    }

    /// Region pairs `(a, b)`, `a < b`, joined by at least one superpixel edge.
    pub fn region_adjacency(&self, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let set: BTreeSet<(usize, usize)> = edges
            .iter()
            .filter_map(|&(u, v)| {
                let (a, b) = (self.assignment[u], self.assignment[v]);
                (a != b).then(|| (a.min(b), a.max(b)))
            })
            .collect();
        set.into_iter().collect()
    }
}

/// Union-find with path halving and union by index (deterministic roots).
#[derive(Debug, Clone)]
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionId {
    pub image: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: RegionId,
    pub superpixels: Vec<usize>,
    pub mask: Grid<bool>,
    /// Normalised (row, col); equals the area-weighted mean of member centroids.
    pub centroid: (f64, f64),
    pub area_fraction: f64,
    pub pixel_count: usize,
    pub bbox: Rect,
    pub label: Option<LabelId>,
}

/// Regions of `image` under `partition`. Masks are disjoint and cover the image.
pub fn regions_of(
    image_index: usize,
    image: &ImageRecord,
    partition: &Partition,
) -> Result<Vec<Region>> {
    SuperpixelGraph::build(image)?.regions(image_index, partition)
}

/// A mask placed into `target_image` by a detection of `source_exemplar`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationRecord {
    pub source_exemplar: String,
    pub target_image: usize,
    /// Column of the mask's top-left corner.
    pub x: usize,
    /// Row of the mask's top-left corner.
    pub y: usize,
    pub mask: Grid<bool>,
    pub score: f64,
}

impl PropagationRecord {
    pub fn rect(&self) -> Rect {
        Rect::new(self.y, self.x, self.mask.height(), self.mask.width())
    }

    /// The mask painted into a full `width`×`height` raster.
    pub fn placed_mask(&self, width: usize, height: usize) -> Grid<bool> {
        let mut out = Grid::filled(width, height, false);
        for r in 0..self.mask.height() {
            for c in 0..self.mask.width() {
                if *self.mask.get(r, c) && self.y + r < height && self.x + c < width {
                    out.set(self.y + r, self.x + c, true);
                }
            }
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn image_from_map(map: Vec<Vec<u32>>) -> ImageRecord {
        let h = map.len();
        let w = map[0].len();
        let flat: Vec<u32> = map.into_iter().flatten().collect();
        ImageRecord {
            id: "t".into(),
            pixels: Grid::filled(w, h, [128, 128, 128]),
            tags: BTreeSet::new(),
            superpixel_map: Grid::from_vec(w, h, flat).unwrap(),
            contour_map: Grid::filled(w, h, false),
            ground_truth: None,
        }
    }

    #[test]
    fn two_by_two_counts() {
        let img = image_from_map(vec![vec![0, 0], vec![1, 1]]);
        let sps = superpixels_of(&img).unwrap();
        assert_eq!(sps.len(), 2);
        assert_eq!(sps[0].pixel_count, 2);
        assert_eq!(sps[1].pixel_count, 2);
        assert_eq!(sps[0].centroid, (0.25, 0.5));
    }

    #[test]
    fn single_superpixel_is_centered() {
        let img = image_from_map(vec![vec![0; 5]; 3]);
        let sps = superpixels_of(&img).unwrap();
        assert_eq!(sps.len(), 1);
        assert!((sps[0].centroid.0 - 0.5).abs() < 1e-12);
        assert!((sps[0].centroid.1 - 0.5).abs() < 1e-12);
        assert_eq!(sps[0].bbox, Rect::new(0, 0, 3, 5));
    }

    #[test]
    fn gap_in_ids_is_malformed() {
        let img = image_from_map(vec![vec![0, 0], vec![2, 2]]);
        assert!(matches!(
            superpixels_of(&img),
            Err(Error::MalformedInput(_))
        ));
    }

    #[test]
    fn disconnected_superpixel_is_malformed() {
        let img = image_from_map(vec![vec![0, 1, 0]]);
        assert!(matches!(
            superpixels_of(&img),
            Err(Error::MalformedInput(_))
        ));
    }

    #[test]
    fn identity_and_single_partitions() {
        let img = image_from_map(vec![vec![0, 1], vec![2, 3]]);
        let ident = regions_of(0, &img, &Partition::singletons(4)).unwrap();
        assert_eq!(ident.len(), 4);
        let one = regions_of(0, &img, &Partition::single(4)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].area_fraction, 1.0);
    }

    #[test]
    fn grouped_regions_are_disjoint_and_cover() {
        let img = image_from_map(vec![vec![0, 1], vec![2, 3]]);
        let p = Partition::from_assignment(&[0, 0, 1, 1]);
        let regions = regions_of(0, &img, &p).unwrap();
        assert_eq!(regions.len(), 2);
        let mut cover = 0;
        for i in 0..4 {
            let owners = regions.iter().filter(|r| r.mask.as_slice()[i]).count();
            assert_eq!(owners, 1);
            cover += owners;
        }
        assert_eq!(cover, 4);
        assert_eq!(regions[0].superpixels, vec![0, 1]);
    }

    #[test]
    fn partition_length_mismatch() {
        let img = image_from_map(vec![vec![0, 1]]);
        assert!(regions_of(0, &img, &Partition::singletons(3)).is_err());
    }

    #[test]
    fn canonical_form() {
        let a = Partition::from_assignment(&[5, 5, 2, 9, 2]);
        assert_eq!(a.assignment, vec![0, 0, 1, 2, 1]);
        assert_eq!(a.region_count, 3);
    }

    #[test]
    fn vocabulary_requires_background_first() {
        assert!(Vocabulary::new(vec!["coat".into(), "background".into()]).is_err());
        let v = Vocabulary::new(vec!["background".into(), "coat".into()]).unwrap();
        assert_eq!(v.id("coat").unwrap(), 1);
        assert!(matches!(v.id("hat"), Err(Error::UnknownLabel(_))));
    }
}
