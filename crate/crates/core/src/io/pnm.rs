//! Binary PPM (P6) and PGM (P5) codecs.
//!
//! 16-bit PGM samples are big-endian. Only the features the corpus format
//! needs are supported: a single image per file, comments in the header,
//! maxval up to 65535.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Grid;

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::malformed("truncated PNM header"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::malformed("truncated PNM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap_or("");
        *field = text
            .parse()
            .map_err(|_| Error::malformed("invalid number in PNM header"))?;
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::malformed("missing whitespace after PNM header"));
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::malformed(format!(
            "PNM maxval {maxval} out of range"
        )));
    }
    Ok(Header {
        magic,
        width: width as usize,
        height: height as usize,
        maxval,
        data_offset: pos + 1,
    })
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Grid<[u8; 3]>> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P6" {
        return Err(Error::malformed("expected binary PPM (P6)"));
    }
    if h.maxval > 255 {
        return Err(Error::malformed("only 8-bit PPM is supported"));
    }
    let n = h.width * h.height;
    let body = &bytes[h.data_offset..];
    if body.len() < 3 * n {
        return Err(Error::malformed("truncated PPM raster"));
    }
    let data = body[..3 * n]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    Ok(Grid::from_vec(h.width, h.height, data).expect("length checked"))
}

pub fn encode_ppm(img: &Grid<[u8; 3]>) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.reserve(img.len() * 3);
    for p in img.as_slice() {
        out.extend_from_slice(p);
    }
    out
}

/// Decodes an 8- or 16-bit binary PGM into 16-bit samples.
pub fn decode_pgm(bytes: &[u8]) -> Result<Grid<u16>> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P5" {
        return Err(Error::malformed("expected binary PGM (P5)"));
    }
    let n = h.width * h.height;
    let body = &bytes[h.data_offset..];
    let data: Vec<u16> = if h.maxval < 256 {
        if body.len() < n {
            return Err(Error::malformed("truncated PGM raster"));
        }
        body[..n].iter().map(|&b| b as u16).collect()
    } else {
        if body.len() < 2 * n {
            return Err(Error::malformed("truncated PGM raster"));
        }
        body[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(Grid::from_vec(h.width, h.height, data).expect("length checked"))
}

/// Encodes a 16-bit binary PGM (maxval 65535, big-endian samples).
pub fn encode_pgm16(img: &Grid<u16>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    out.reserve(img.len() * 2);
    for v in img.as_slice() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Encodes an 8-bit binary PGM.
pub fn encode_pgm8(img: &Grid<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_slice());
    out
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Load {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_ppm(path: &Path) -> Result<Grid<[u8; 3]>> {
    with_path(path, decode_ppm(&read(path)?))
}

pub fn read_pgm(path: &Path) -> Result<Grid<u16>> {
    with_path(path, decode_pgm(&read(path)?))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm16_is_big_endian() {
        let g = Grid::from_vec(2, 1, vec![0x0102u16, 0xFFFE]).unwrap();
        let bytes = encode_pgm16(&g);
        let header = b"P5\n2 1\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0x01, 0x02, 0xFF, 0xFE]);
        assert_eq!(decode_pgm(&bytes).unwrap(), g);
    }

    #[test]
    fn ppm_roundtrip_with_comment() {
        let g = Grid::from_fn(3, 2, |r, c| [r as u8, c as u8, 7]);
        let mut bytes = encode_ppm(&g);
        // splice a comment into the header
        bytes.splice(3..3, b"# hello\n".iter().copied());
        assert_eq!(decode_ppm(&bytes).unwrap(), g);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        assert!(decode_ppm(b"P5\n1 1\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n2").is_err());
    }

    #[test]
    fn pgm8_decodes_to_u16() {
        let g = Grid::from_vec(2, 2, vec![0u8, 255, 3, 4]).unwrap();
        let d = decode_pgm(&encode_pgm8(&g)).unwrap();
        assert_eq!(d.as_slice(), &[0, 255, 3, 4]);
    }
}
