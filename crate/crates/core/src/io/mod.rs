//! On-disk formats: PPM/PGM rasters, the corpus manifest, region maps and
//! the exemplar/propagation records exchanged between CLI stages.

pub mod manifest;
pub mod pnm;
pub mod records;

use std::path::Path;

use crate::corpus::{Partition, SuperpixelGraph};
use crate::error::{Error, Result};
use crate::raster::Grid;

/// Paints a partition into a per-pixel region-index raster.
pub fn region_map(graph: &SuperpixelGraph, partition: &Partition) -> Result<Grid<u16>> {
    if partition.region_count > u16::MAX as usize + 1 {
        return Err(Error::malformed("too many regions for a 16-bit region map"));
    }
    let mut out = Grid::filled(graph.width, graph.height, 0u16);
    for (s, pix) in graph.pixels.iter().enumerate() {
        let k = partition.assignment[s] as u16;
        for &p in pix {
            out.as_mut_slice()[p] = k;
        }
    }
    Ok(out)
}

/// Recovers a partition from a region map; every superpixel must be uniform.
pub fn partition_from_region_map(graph: &SuperpixelGraph, map: &Grid<u16>) -> Result<Partition> {
    if map.width() != graph.width || map.height() != graph.height {
        return Err(Error::malformed("region map dimensions differ from image"));
    }
    let mut raw = Vec::with_capacity(graph.len());
    for pix in &graph.pixels {
        let k = map.as_slice()[pix[0]];
        if pix.iter().any(|&p| map.as_slice()[p] != k) {
            return Err(Error::malformed("region map splits a superpixel"));
        }
        raw.push(k as usize);
    }
    Ok(Partition::from_assignment(&raw))
}

pub fn write_pgm16(path: &Path, grid: &Grid<u16>) -> Result<()> {
    pnm::write_bytes(path, &pnm::encode_pgm16(grid))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    pnm::write_bytes(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
