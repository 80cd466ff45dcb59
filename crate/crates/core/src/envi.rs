//! ENVI raster I/O: BSQ interleave, 32-bit IEEE-754 payload.
//!
//! The header is a text file of `key = value` lines; values in braces may span
//! several lines. Reading honours `byte order` and `header offset`; writing
//! always produces little-endian data.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hsi::{DegreeMap, Hsi};
use crate::scalar::Scalar;

const DATA_EXTENSIONS: [&str; 5] = ["img", "raw", "dat", "bsq", "bin"];

/// Parsed subset of an ENVI header.
#[derive(Debug, Clone, PartialEq)]
pub struct EnviHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub header_offset: usize,
    pub big_endian: bool,
    pub wavelengths: Option<Vec<f64>>,
}

impl EnviHeader {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("ENVI") => {}
            other => {
                return Err(Error::Parse(format!(
                    "header must start with 'ENVI', found {:?}",
                    other.unwrap_or("")
                )))
            }
        }
        let fields = parse_fields(lines)?;
        let get_usize = |key: &str| -> Result<usize> {
            let raw = fields
                .get(key)
                .ok_or_else(|| Error::Parse(format!("missing header key '{key}'")))?;
            raw.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("key '{key}' has non-integer value '{raw}'")))
        };
        let samples = get_usize("samples")?;
        let lines_n = get_usize("lines")?;
        let bands = get_usize("bands")?;
        if samples == 0 || lines_n == 0 || bands == 0 {
            return Err(Error::Parse("samples, lines and bands must be positive".into()));
        }
        let header_offset = if fields.contains_key("header offset") {
            get_usize("header offset")?
        } else {
            0
        };
        let data_type = get_usize("data type")?;
        if data_type != 4 {
            return Err(Error::Parse(format!(
                "unsupported data type {data_type}; only 4 (32-bit float) is supported"
            )));
        }
        let interleave = fields
            .get("interleave")
            .map(|s| s.trim().to_ascii_lowercase())
            .unwrap_or_else(|| "bsq".into());
        if interleave != "bsq" {
            return Err(Error::Parse(format!("unsupported interleave '{interleave}'")));
        }
        let big_endian = match fields.get("byte order").map(|s| s.trim()) {
            None | Some("0") => false,
            Some("1") => true,
            Some(other) => return Err(Error::Parse(format!("invalid byte order '{other}'"))),
        };
        let wavelengths = match fields.get("wavelength") {
            None => None,
            Some(raw) => {
                let vals = raw
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| Error::Parse(format!("bad wavelength entry '{s}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() != bands {
                    return Err(Error::Parse(format!(
                        "{} wavelengths listed for {bands} bands",
                        vals.len()
                    )));
                }
                Some(vals)
            }
        };
        Ok(Self {
            samples,
            lines: lines_n,
            bands,
            header_offset,
            big_endian,
            wavelengths,
        })
    }

    pub fn render(&self) -> String {
        let mut s = String::from("ENVI\n");
        s.push_str("description = {hadfuzz cube}\n");
        s.push_str(&format!("samples = {}\n", self.samples));
        s.push_str(&format!("lines = {}\n", self.lines));
        s.push_str(&format!("bands = {}\n", self.bands));
        s.push_str(&format!("header offset = {}\n", self.header_offset));
        s.push_str("file type = ENVI Standard\n");
        s.push_str("data type = 4\n");
        s.push_str("interleave = bsq\n");
        s.push_str(&format!("byte order = {}\n", u8::from(self.big_endian)));
        if let Some(w) = &self.wavelengths {
            let list: Vec<String> = w.iter().map(|v| format!("{v}")).collect();
            s.push_str(&format!("wavelength = {{{}}}\n", list.join(", ")));
        }
        s
    }
}

fn parse_fields<'a>(lines: impl Iterator<Item = &'a str>) -> Result<HashMap<String, String>> {
    let mut fields = HashMap::new();
    let mut pending: Option<(String, String)> = None;
    for line in lines {
        if let Some((key, mut acc)) = pending.take() {
            acc.push(' ');
            acc.push_str(line.trim());
            if acc.contains('}') {
                fields.insert(key, strip_braces(&acc));
            } else {
                pending = Some((key, acc));
            }
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("malformed header line '{trimmed}'")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        if value.starts_with('{') && !value.contains('}') {
            pending = Some((key, value));
        } else {
            fields.insert(key, strip_braces(&value));
        }
    }
    if let Some((key, _)) = pending {
        return Err(Error::Parse(format!("unterminated brace list for key '{key}'")));
    }
    Ok(fields)
}

fn strip_braces(s: &str) -> String {
    s.trim().trim_start_matches('{').trim_end_matches('}').trim().to_string()
}

fn base_path(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("hdr") || DATA_EXTENSIONS.contains(&ext) => {
            path.with_extension("")
        }
        _ => path.to_path_buf(),
    }
}

/// Paths `(header, payload)` written by [`save_envi`] for a given target.
pub fn envi_paths(path: &Path) -> (PathBuf, PathBuf) {
    let base = base_path(path);
    (base.with_extension("hdr"), base.with_extension("img"))
}

fn find_payload(header_path: &Path) -> Result<PathBuf> {
    let base = base_path(header_path);
    let mut candidates: Vec<PathBuf> = DATA_EXTENSIONS.iter().map(|e| base.with_extension(e)).collect();
    candidates.push(base.clone());
    candidates
        .into_iter()
        .find(|p| p.is_file() && p != header_path)
        .ok_or_else(|| {
            Error::Structure(format!("no payload file found next to {}", header_path.display()))
        })
}

/// Reads a cube from an ENVI header and its companion payload.
pub fn load_envi<T: Scalar>(header_path: impl AsRef<Path>) -> Result<Hsi<T>> {
    let header_path = header_path.as_ref();
    let text = fs::read_to_string(header_path)?;
    let header = EnviHeader::parse(&text)?;
    let payload_path = find_payload(header_path)?;
    let bytes = fs::read(&payload_path)?;
    decode_payload(&header, &bytes)
}

/// Decodes a raw BSQ payload according to `header`.
pub fn decode_payload<T: Scalar>(header: &EnviHeader, bytes: &[u8]) -> Result<Hsi<T>> {
    let (h, w, b) = (header.lines, header.samples, header.bands);
    let expected = header.header_offset + h * w * b * 4;
    if bytes.len() != expected {
        return Err(Error::Structure(format!(
            "payload holds {} bytes, header implies {expected} ({h} lines x {w} samples x {b} bands x 4 + offset {})",
            bytes.len(),
            header.header_offset
        )));
    }
    let body = &bytes[header.header_offset..];
    let n = h * w;
    let mut data = vec![T::zero(); n * b];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if header.big_endian {
            f32::from_be_bytes(raw)
        } else {
            f32::from_le_bytes(raw)
        };
        let band = i / n;
        let p = i % n;
        data[p * b + band] = T::of(v as f64);
    }
    let hsi = Hsi::new(h, w, b, data)?;
    match &header.wavelengths {
        Some(wl) => hsi.with_wavelengths(wl.clone()),
        None => Ok(hsi),
    }
}

/// Encodes a cube as a little-endian 32-bit BSQ payload.
pub fn encode_payload<T: Scalar>(h: &Hsi<T>) -> Result<Vec<u8>> {
    let n = h.pixels();
    let mut out = Vec::with_capacity(n * h.bands() * 4);
    for band in 0..h.bands() {
        for p in 0..n {
            let v = h.data()[p * h.bands() + band];
            let f = v.to_f32().unwrap_or(f32::NAN);
            if !f.is_finite() {
                return Err(Error::Argument(format!(
                    "value {v} at pixel {p}, band {band} is not representable as 32-bit float"
                )));
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

/// Writes `<base>.hdr` and `<base>.img`. Values are stored as `f32`, so the
/// round trip through [`load_envi`] is exact for `f32`-representable cubes.
pub fn save_envi<T: Scalar>(h: &Hsi<T>, path: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let (hdr_path, img_path) = envi_paths(path.as_ref());
    let header = EnviHeader {
        samples: h.width(),
        lines: h.height(),
        bands: h.bands(),
        header_offset: 0,
        big_endian: false,
        wavelengths: h.wavelengths().map(<[f64]>::to_vec),
    };
    let payload = encode_payload(h)?;
    fs::write(&img_path, payload)?;
    fs::write(&hdr_path, header.render())?;
    Ok((hdr_path, img_path))
}

/// Writes a degree map as a one-band cube.
pub fn save_map<T: Scalar>(map: &DegreeMap<T>, path: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let cube = Hsi::new(map.height(), map.width(), 1, map.values().to_vec())?;
    save_envi(&cube, path)
}

/// Reads a one-band cube as a degree map.
pub fn load_map<T: Scalar>(header_path: impl AsRef<Path>) -> Result<DegreeMap<T>> {
    let cube: Hsi<T> = load_envi(header_path)?;
    if cube.bands() != 1 {
        return Err(Error::Structure(format!("expected a single-band map, found {} bands", cube.bands())));
    }
    DegreeMap::new(cube.height(), cube.width(), cube.into_data())
}
