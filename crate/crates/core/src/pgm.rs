//! Binary PGM (P5) heatmaps and reference masks.

use std::path::Path;

use crate::error::{Error, Result};
use crate::hsi::{DegreeMap, Mask};
use crate::scalar::Scalar;

pub const MAXVAL: u16 = 65535;

/// Encodes degrees as 16-bit big-endian gray levels `round(v * 65535)`.
pub fn encode_pgm16<T: Scalar>(map: &DegreeMap<T>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", map.width(), map.height(), MAXVAL).into_bytes();
    for &v in map.values() {
        let level = (v.as_f64().clamp(0.0, 1.0) * MAXVAL as f64).round() as u16;
        out.extend_from_slice(&level.to_be_bytes());
    }
    out
}

pub fn write_pgm16<T: Scalar>(map: &DegreeMap<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_pgm16(map))?;
    Ok(())
}

/// Gray levels of a P5 file along with its dimensions and maxval.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub levels: Vec<u16>,
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("PGM header truncated".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(Error::Parse("not a binary PGM (expected P5 magic)".into()));
    }
    let mut num = |what: &str| -> Result<usize> {
        let t = token()?;
        t.parse().map_err(|_| Error::Parse(format!("PGM {what} '{t}' is not a number")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if width == 0 || height == 0 || maxval == 0 || maxval > MAXVAL as usize {
        return Err(Error::Parse(format!("PGM header {width}x{height} maxval {maxval} is invalid")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let depth = if maxval > 255 { 2 } else { 1 };
    let need = width * height * depth;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != need {
        return Err(Error::Structure(format!(
            "PGM raster holds {} bytes, header implies {need}",
            raster.len()
        )));
    }
    let levels = if depth == 2 {
        raster.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster.iter().map(|&b| b as u16).collect()
    };
    Ok(GrayImage {
        width,
        height,
        maxval: maxval as u16,
        levels,
    })
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_pgm(&std::fs::read(path)?)
}

/// Gray levels rescaled by maxval into `[0, 1]`.
pub fn read_pgm_degrees(path: impl AsRef<Path>) -> Result<DegreeMap<f64>> {
    let img = read_pgm(path)?;
    let m = img.maxval as f64;
    DegreeMap::new(img.height, img.width, img.levels.iter().map(|&l| l as f64 / m).collect())
}

pub fn write_mask_pgm(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_pgm16(&mask.to_degrees::<f64>(), path)
}

/// Any nonzero level marks an anomaly.
pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<Mask> {
    let img = read_pgm(path)?;
    Mask::new(img.height, img.width, img.levels.iter().map(|&l| l > 0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_levels() {
        let m = DegreeMap::new(1, 3, vec![0.0f64, 0.5, 1.0]).unwrap();
        let bytes = encode_pgm16(&m);
        assert!(bytes.starts_with(b"P5\n3 1\n65535\n"));
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.levels, vec![0, 32768, 65535]);
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let mask = Mask::new(2, 3, vec![true, false, false, true, true, false]).unwrap();
        write_mask_pgm(&mask, &path).unwrap();
        assert_eq!(read_mask_pgm(&path).unwrap(), mask);
    }

    #[test]
    fn eight_bit_and_comments() {
        let mut bytes = b"P5 # comment\n2 2\n# more\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 51, 0]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!((img.width, img.height, img.maxval), (2, 2, 255));
        assert_eq!(img.levels, vec![0, 255, 51, 0]);
    }

    #[test]
    fn malformed_files() {
        assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0"), Err(Error::Parse(_))));
        assert!(matches!(decode_pgm(b"P5\n2 2\n255\n\x00"), Err(Error::Structure(_))));
        assert!(decode_pgm(b"P5\nx 2\n255\n").is_err());
    }
}
