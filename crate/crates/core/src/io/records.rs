//! Exemplars as JSON lines and propagations as a JSON array.
//!
//! Weight vectors are base64 of little-endian `f64`s; binary masks are
//! run lengths over the row-major raster, starting with a run of `false`.

use std::fmt::Write as _;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PropagationRecord, RegionId};
use crate::error::{Error, Result};
use crate::esvm::{Calibration, Exemplar};
use crate::features::HogTemplate;
use crate::raster::{Grid, Rect};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RleMask {
    pub width: usize,
    pub height: usize,
    pub runs: Vec<usize>,
}

impl RleMask {
    pub fn encode(mask: &Grid<bool>) -> Self {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0;
        for &m in mask.as_slice() {
            if m == current {
                len += 1;
            } else {
                runs.push(len);
                current = m;
                len = 1;
            }
        }
        runs.push(len);
        RleMask {
            width: mask.width(),
            height: mask.height(),
            runs,
        }
    }

    pub fn decode(&self) -> Result<Grid<bool>> {
        let mut data = Vec::with_capacity(self.width * self.height);
        let mut value = false;
        for &r in &self.runs {
            data.extend(std::iter::repeat_n(value, r));
            value = !value;
        }
        Grid::from_vec(self.width, self.height, data)
            .ok_or_else(|| Error::malformed("run lengths do not add up to the mask size"))
    }
}

pub fn encode_weights(w: &[f64]) -> String {
    let bytes: Vec<u8> = w.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_weights(text: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::malformed(format!("bad base64 weights: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::malformed(
            "weight byte length is not a multiple of 8",
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExemplarRecord {
    pub id: String,
    pub source_image: String,
    pub source_region: usize,
    /// `[top, left, height, width]`.
    pub source_rect: [usize; 4],
    pub template: HogTemplate,
    pub w: String,
    pub bias: f64,
    pub alpha: f64,
    pub beta: f64,
    pub calibration_fallback: bool,
    pub energy: f64,
    pub mask: RleMask,
}

impl ExemplarRecord {
    pub fn from_exemplar(e: &Exemplar, corpus: &Corpus) -> Self {
        let r = e.source_rect;
        ExemplarRecord {
            id: e.id.clone(),
            source_image: corpus.images[e.source.image].id.clone(),
            source_region: e.source.index,
            source_rect: [r.top, r.left, r.height(), r.width()],
            template: e.template,
            w: encode_weights(&e.w),
            bias: e.bias,
            alpha: e.calibration.alpha,
            beta: e.calibration.beta,
            calibration_fallback: e.calibration_fallback,
            energy: e.energy,
            mask: RleMask::encode(&e.mask),
        }
    }

    pub fn to_exemplar(&self, corpus: &Corpus) -> Result<Exemplar> {
        let image = corpus.index_of(&self.source_image).ok_or_else(|| {
            Error::malformed(format!(
                "exemplar `{}`: unknown image `{}`",
                self.id, self.source_image
            ))
        })?;
        let w = decode_weights(&self.w)?;
        if w.len() != self.template.descriptor_len() {
            return Err(Error::malformed(format!(
                "exemplar `{}`: weight length mismatch",
                self.id
            )));
        }
        let [top, left, height, width] = self.source_rect;
        Ok(Exemplar {
            id: self.id.clone(),
            source: RegionId {
                image,
                index: self.source_region,
            },
            source_rect: Rect::new(top, left, height, width),
            template: self.template,
            w,
            bias: self.bias,
            calibration: Calibration {
                alpha: self.alpha,
                beta: self.beta,
            },
            calibration_fallback: self.calibration_fallback,
            mask: self.mask.decode()?,
            energy: self.energy,
        })
    }
}

pub fn write_exemplars(path: &Path, exemplars: &[Exemplar], corpus: &Corpus) -> Result<()> {
    let mut text = String::new();
    for e in exemplars {
        let line = serde_json::to_string(&ExemplarRecord::from_exemplar(e, corpus))?;
        writeln!(text, "{line}").expect("writing to a String");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_exemplars(path: &Path, corpus: &Corpus) -> Result<Vec<Exemplar>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<ExemplarRecord>(l)?.to_exemplar(corpus))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationJson {
    pub source_exemplar: String,
    pub target_image: String,
    pub x: usize,
    pub y: usize,
    pub score: f64,
    pub mask: RleMask,
}

impl PropagationJson {
    pub fn from_record(p: &PropagationRecord, corpus: &Corpus) -> Self {
        PropagationJson {
            source_exemplar: p.source_exemplar.clone(),
            target_image: corpus.images[p.target_image].id.clone(),
            x: p.x,
            y: p.y,
            score: p.score,
            mask: RleMask::encode(&p.mask),
        }
    }

    pub fn to_record(&self, corpus: &Corpus) -> Result<PropagationRecord> {
        let target_image = corpus.index_of(&self.target_image).ok_or_else(|| {
            Error::malformed(format!(
                "propagation into unknown image `{}`",
                self.target_image
            ))
        })?;
        Ok(PropagationRecord {
            source_exemplar: self.source_exemplar.clone(),
            target_image,
            x: self.x,
            y: self.y,
            mask: self.mask.decode()?,
            score: self.score,
        })
    }
}

pub fn write_propagations(path: &Path, props: &[PropagationRecord], corpus: &Corpus) -> Result<()> {
    let json: Vec<PropagationJson> = props
        .iter()
        .map(|p| PropagationJson::from_record(p, corpus))
        .collect();
    super::write_json(path, &json)
}

pub fn read_propagations(path: &Path, corpus: &Corpus) -> Result<Vec<PropagationRecord>> {
    let json: Vec<PropagationJson> = super::read_json(path)?;
    json.iter().map(|p| p.to_record(corpus)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rle_roundtrip() {
        let mask = Grid::from_vec(3, 2, vec![true, true, false, false, false, true]).unwrap();
        let rle = RleMask::encode(&mask);
        assert_eq!(rle.runs, vec![0, 2, 3, 1]);
        assert_eq!(rle.decode().unwrap(), mask);
        let bad = RleMask {
            width: 2,
            height: 2,
            runs: vec![1, 1],
        };
        assert!(bad.decode().is_err());
    }

    #[test]
    fn weights_roundtrip() {
        let w = vec![0.0, -1.5, f64::MIN_POSITIVE, 1e300];
        let text = encode_weights(&w);
        assert_eq!(decode_weights(&text).unwrap(), w);
        assert_eq!(
            &STANDARD.decode(encode_weights(&[1.0])).unwrap(),
            &1.0f64.to_le_bytes()
        );
        assert!(decode_weights("AAAA").is_err());
    }
}
