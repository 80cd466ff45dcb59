//! Seeded synthetic scenes: smooth linear mixtures of a few endmembers with
//! small implanted blobs of a spectrally distinct material.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::envi::save_envi;
use crate::error::{Error, Result};
use crate::hsi::{Hsi, Mask};
use crate::pgm::write_mask_pgm;
use crate::scalar::Scalar;

/// Minimum spectral angle between the anomaly and every endmember.
pub const MIN_ANOMALY_ANGLE_DEG: f64 = 15.0;
const MAX_RETRIES: usize = 1000;
pub const DEFAULT_ANOMALY_FRACTION: f64 = 1.0;
const CONTROL_POINTS: usize = 7;

/// Offsets filled in order as a blob grows from one to nine pixels.
const BLOB_ORDER: [(isize, isize); 9] = [(0, 0), (0, 1), (1, 0), (1, 1), (-1, 0), (0, -1), (-1, -1), (-1, 1), (1, -1)];

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub n_endmembers: usize,
    pub n_anomalies: usize,
    /// Pixels per anomaly, 1 to 9.
    pub anomaly_size: usize,
    /// Share of the anomaly spectrum in an implanted pixel; the rest is the
    /// local background mixture.
    pub anomaly_fraction: f64,
    /// `None` leaves the cube noise-free.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            bands: 30,
            n_endmembers: 4,
            n_anomalies: 5,
            anomaly_size: 3,
            anomaly_fraction: DEFAULT_ANOMALY_FRACTION,
            snr_db: Some(30.0),
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < 3 || self.width < 3 || self.bands < 2 {
            return Err(Error::Argument(format!(
                "scene must be at least 3x3 with 2 bands, got {}x{}x{}",
                self.height, self.width, self.bands
            )));
        }
        if self.n_endmembers == 0 {
            return Err(Error::Argument("scene needs at least one endmember".into()));
        }
        if !(1..=9).contains(&self.anomaly_size) {
            return Err(Error::Argument(format!("anomaly size must be 1..=9, got {}", self.anomaly_size)));
        }
        if !(self.anomaly_fraction > 0.0 && self.anomaly_fraction <= 1.0) {
            return Err(Error::Argument(format!(
                "anomaly fraction must lie in (0, 1], got {}",
                self.anomaly_fraction
            )));
        }
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(Error::Argument(format!("snr must be finite, got {s}")));
            }
        }
        Ok(())
    }
}

/// A generated scene with its ground truth.
#[derive(Debug, Clone)]
pub struct Scene<T = f64> {
    pub cube: Hsi<T>,
    pub reference: Mask,
    /// Per-endmember abundance maps, row-major.
    pub abundances: Vec<Vec<f64>>,
    pub endmembers: Vec<Vec<f64>>,
    pub anomaly_spectrum: Vec<f64>,
}

fn catmull_rom(p: &[f64], t: f64) -> f64 {
    let n = p.len();
    let x = t * (n - 1) as f64;
    let i = (x.floor() as usize).min(n - 2);
    let u = x - i as f64;
    let at = |k: isize| p[k.clamp(0, n as isize - 1) as usize];
    let (p0, p1, p2, p3) = (at(i as isize - 1), at(i as isize), at(i as isize + 1), at(i as isize + 2));
    0.5 * ((2.0 * p1) + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u)
}

/// Cubic-interpolated random walk rescaled to `[0.1, 0.9]`.
pub fn smooth_spectrum(bands: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut ctrl = Vec::with_capacity(CONTROL_POINTS);
    let mut v: f64 = rng.gen_range(0.0..1.0);
    for _ in 0..CONTROL_POINTS {
        ctrl.push(v);
        v += rng.gen_range(-1.0..1.0);
    }
    let raw: Vec<f64> = (0..bands).map(|b| catmull_rom(&ctrl, b as f64 / (bands - 1).max(1) as f64)).collect();
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    if hi - lo <= f64::EPSILON {
        return vec![0.5; bands];
    }
    raw.iter().map(|x| 0.1 + 0.8 * (x - lo) / (hi - lo)).collect()
}

/// Angle between two spectra in degrees.
pub fn spectral_angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Softmax of a few low-frequency cosine fields: nonnegative, summing to one.
fn abundance_fields(height: usize, width: usize, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let logits: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            let waves: Vec<(f64, f64, f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.gen_range(0.5..2.5),
                        rng.gen_range(-1.5..1.5),
                        rng.gen_range(-1.5..1.5),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            (0..height * width)
                .map(|p| {
                    let (y, x) = ((p / width) as f64 / height as f64, (p % width) as f64 / width as f64);
                    waves
                        .iter()
                        .map(|&(amp, fy, fx, ph)| amp * (std::f64::consts::TAU * (fy * y + fx * x) + ph).cos())
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut out = vec![vec![0.0; height * width]; count];
    for p in 0..height * width {
        let m = (0..count).map(|k| logits[k][p]).fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = (0..count).map(|k| (logits[k][p] - m).exp()).collect();
        let s: f64 = e.iter().sum();
        for k in 0..count {
            out[k][p] = e[k] / s;
        }
    }
    out
}

fn blob_cells(r: usize, c: usize, size: usize) -> Vec<(isize, isize)> {
    BLOB_ORDER[..size].iter().map(|&(dr, dc)| (r as isize + dr, c as isize + dc)).collect()
}

pub fn gen_scene<T: Scalar>(spec: &SceneSpec) -> Result<Scene<T>> {
    spec.validate()?;
    let (h, w, c) = (spec.height, spec.width, spec.bands);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let endmembers: Vec<Vec<f64>> = (0..spec.n_endmembers).map(|_| smooth_spectrum(c, &mut rng)).collect();
    let abundances = abundance_fields(h, w, spec.n_endmembers, &mut rng);

    let mut anomaly_spectrum = None;
    for _ in 0..MAX_RETRIES {
        let cand = smooth_spectrum(c, &mut rng);
        if endmembers.iter().all(|e| spectral_angle_deg(&cand, e) >= MIN_ANOMALY_ANGLE_DEG) {
            anomaly_spectrum = Some(cand);
            break;
        }
    }
    let anomaly_spectrum = anomaly_spectrum.ok_or_else(|| {
        Error::Generation(format!("no anomaly spectrum {MIN_ANOMALY_ANGLE_DEG} degrees from all endmembers"))
    })?;

    // occupied cells plus a one-pixel guard ring keep blobs apart
    let mut blocked = vec![false; h * w];
    let mut reference = vec![false; h * w];
    for placed in 0..spec.n_anomalies {
        let mut done = false;
        for _ in 0..MAX_RETRIES {
            let (r, col) = (rng.gen_range(1..h - 1), rng.gen_range(1..w - 1));
            let cells = blob_cells(r, col, spec.anomaly_size);
            let fits = cells.iter().all(|&(y, x)| {
                y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w && !blocked[y as usize * w + x as usize]
            });
            if !fits {
                continue;
            }
            for &(y, x) in &cells {
                reference[y as usize * w + x as usize] = true;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (yy, xx) = (y + dy, x + dx);
                        if yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                            blocked[yy as usize * w + xx as usize] = true;
                        }
                    }
                }
            }
            done = true;
            break;
        }
        if !done {
            return Err(Error::Generation(format!(
                "could not place anomaly {} of {} without overlap after {MAX_RETRIES} attempts",
                placed + 1,
                spec.n_anomalies
            )));
        }
    }

    let mut data = Vec::with_capacity(h * w * c);
    for p in 0..h * w {
        for b in 0..c {
            let background: f64 = (0..spec.n_endmembers).map(|k| abundances[k][p] * endmembers[k][b]).sum();
            let v = if reference[p] {
                spec.anomaly_fraction * anomaly_spectrum[b] + (1.0 - spec.anomaly_fraction) * background
            } else {
                background
            };
            data.push(v);
        }
    }
    let mut cube = Hsi::new(h, w, c, data)?;
    if let Some(snr) = spec.snr_db {
        cube = add_noise(&cube, snr, spec.seed ^ 0x5EED_0F_401_5E)?;
    }
    Ok(Scene {
        cube: cube.cast(),
        reference: Mask::new(h, w, reference)?,
        abundances,
        endmembers,
        anomaly_spectrum,
    })
}

/// Mean of squared values over the cube.
pub fn signal_power<T: Scalar>(h: &Hsi<T>) -> f64 {
    h.data().iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>() / h.data().len() as f64
}

/// i.i.d. Gaussian noise with variance `power / 10^(snr / 10)`. An infinite
/// SNR returns the cube unchanged.
pub fn add_noise<T: Scalar>(h: &Hsi<T>, snr_db: f64, seed: u64) -> Result<Hsi<T>> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::Argument(format!("snr must be a number or +inf, got {snr_db}")));
    }
    if snr_db == f64::INFINITY {
        return Ok(h.clone());
    }
    let sigma = (signal_power(h) / 10f64.powf(snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Argument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = h.data().iter().map(|&v| v + T::of(normal.sample(&mut rng))).collect();
    let noisy = Hsi::new(h.height(), h.width(), h.bands(), data)?;
    Ok(match h.wavelengths() {
        Some(wl) => noisy.with_wavelengths(wl.to_vec())?,
        None => noisy,
    })
}

/// Writes `<base>.hdr`, `<base>.img` and `<base>_ref.pgm`.
pub fn write_scene<T: Scalar>(scene: &Scene<T>, base: impl AsRef<Path>) -> Result<(PathBuf, PathBuf, PathBuf)> {
    let base = base.as_ref();
    let (hdr, img) = save_envi(&scene.cube, base)?;
    let mut name = base.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push("_ref.pgm");
    let ref_path = base.with_file_name(name);
    write_mask_pgm(&scene.reference, &ref_path)?;
    Ok((hdr, img, ref_path))
}
