//! Corpus manifest: one JSON document naming the rasters and tags of each
//! image plus the ordered label vocabulary.
//!
//! ```json
//! {
//!   "labels": ["background", "hat", "coat"],
//!   "images": [
//!     { "id": "img000", "image": "img000.ppm", "superpixels": "img000.sp.pgm",
//!       "contours": "img000.contour.pgm", "ground_truth": "img000.gt.pgm",
//!       "tags": ["background", "coat"] }
//!   ]
//! }
//! ```
//!
//! Raster paths are resolved relative to the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pnm;
use crate::corpus::{Corpus, ImageRecord, LabelId, Vocabulary};
use crate::error::{Error, Result};
use crate::raster::Grid;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub labels: Vec<String>,
    pub images: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub superpixels: PathBuf,
    pub contours: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    pub tags: Vec<String>,
}

pub fn load_corpus(manifest_path: &Path) -> Result<Corpus> {
    let manifest: Manifest = super::read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let vocabulary = Vocabulary::new(manifest.labels.clone())?;
    let mut images = Vec::with_capacity(manifest.images.len());
    for entry in &manifest.images {
        images.push(load_entry(base, entry, &vocabulary)?);
    }
    let corpus = Corpus { vocabulary, images };
    corpus.validate().map_err(|e| match e {
        Error::MalformedInput(m) => Error::Load {
            path: manifest_path.to_path_buf(),
            message: m,
        },
        other => other,
    })?;
    Ok(corpus)
}

fn load_entry(base: &Path, entry: &ManifestEntry, vocabulary: &Vocabulary) -> Result<ImageRecord> {
    let pixels = pnm::read_ppm(&base.join(&entry.image))?;
    let superpixel_map = pnm::read_pgm(&base.join(&entry.superpixels))?.map(|&v| v as u32);
    let contour_map = pnm::read_pgm(&base.join(&entry.contours))?.map(|&v| v != 0);
    let ground_truth: Option<Grid<LabelId>> = entry
        .ground_truth
        .as_ref()
        .map(|p| pnm::read_pgm(&base.join(p)))
        .transpose()?;
    let tags = entry
        .tags
        .iter()
        .map(|t| vocabulary.id(t))
        .collect::<Result<BTreeSet<_>>>()?;
    Ok(ImageRecord {
        id: entry.id.clone(),
        pixels,
        tags,
        superpixel_map,
        contour_map,
        ground_truth,
    })
}

/// Writes every raster of `corpus` into `dir` and a `manifest.json` naming them.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(corpus.images.len());
    for img in &corpus.images {
        let entry = ManifestEntry {
            id: img.id.clone(),
            image: format!("{}.ppm", img.id).into(),
            superpixels: format!("{}.sp.pgm", img.id).into(),
            contours: format!("{}.contour.pgm", img.id).into(),
            ground_truth: img
                .ground_truth
                .as_ref()
                .map(|_| format!("{}.gt.pgm", img.id).into()),
            tags: img
                .tags
                .iter()
                .map(|&t| corpus.vocabulary.name(t).unwrap_or_default().to_string())
                .collect(),
        };
        pnm::write_bytes(&dir.join(&entry.image), &pnm::encode_ppm(&img.pixels))?;
        let sp = img.superpixel_map.map(|&v| v as u16);
        if img
            .superpixel_map
            .as_slice()
            .iter()
            .any(|&v| v > u16::MAX as u32)
        {
            return Err(Error::malformed("superpixel id exceeds 16 bits"));
        }
        pnm::write_bytes(&dir.join(&entry.superpixels), &pnm::encode_pgm16(&sp))?;
        let contours = img.contour_map.map(|&c| if c { 255u8 } else { 0 });
        pnm::write_bytes(&dir.join(&entry.contours), &pnm::encode_pgm8(&contours))?;
        if let (Some(gt), Some(path)) = (&img.ground_truth, &entry.ground_truth) {
            pnm::write_bytes(&dir.join(path), &pnm::encode_pgm16(gt))?;
        }
        entries.push(entry);
    }
    let manifest = Manifest {
        labels: corpus.vocabulary.names().to_vec(),
        images: entries,
    };
    let path = dir.join("manifest.json");
    super::write_json(&path, &manifest)?;
    Ok(path)
}
