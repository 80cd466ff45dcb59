use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hsi::{minmax_values, Hsi};
use crate::linalg::nnls_gram;
use crate::scalar::Scalar;

/// Default number of endmembers.
pub const DEFAULT_ENDMEMBERS: usize = 4;

/// Weight of the sum-to-one row relative to the largest endmember norm.
const SUM_TO_ONE_WEIGHT: f64 = 1e2;

/// Abundance maps and the endmember spectra they refer to.
#[derive(Debug, Clone)]
pub struct AbundanceStack<T = f64> {
    pub height: usize,
    pub width: usize,
    /// One row-major map per endmember.
    pub maps: Vec<Vec<T>>,
    /// `bands x count`, row-major.
    pub endmembers: Vec<T>,
    /// Flat pixel index each endmember was taken from.
    pub endmember_pixels: Vec<usize>,
    /// Set once the maps have been min-max rescaled; they no longer sum to one.
    pub normalized: bool,
}

impl<T: Scalar> AbundanceStack<T> {
    pub fn count(&self) -> usize {
        self.maps.len()
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Copy with every map min-max rescaled to `[0, 1]`.
    pub fn normalized(&self) -> Self {
        Self {
            maps: self.maps.iter().map(|m| minmax_values(m)).collect(),
            normalized: true,
            ..self.clone()
        }
    }
}

/// Greedy successive projection: repeatedly takes the pixel with the largest
/// residual norm and projects its direction out of every pixel.
pub fn successive_projection<T: Scalar>(h: &Hsi<T>, count: usize) -> Vec<usize> {
    let n = h.pixels();
    let c = h.bands();
    let mut residual = h.data().to_vec();
    let mut picked = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best = 0;
        let mut best_norm = T::neg_infinity();
        for p in 0..n {
            if picked.contains(&p) {
                continue;
            }
            let norm: T = residual[p * c..(p + 1) * c].iter().map(|&v| v * v).sum();
            if norm > best_norm {
                best_norm = norm;
                best = p;
            }
        }
        picked.push(best);
        let len = best_norm.sqrt();
        if !(len > T::zero()) {
            continue;
        }
        let u: Vec<T> = residual[best * c..(best + 1) * c].iter().map(|&v| v / len).collect();
        for p in 0..n {
            let row = &mut residual[p * c..(p + 1) * c];
            let dot: T = row.iter().zip(&u).map(|(&a, &b)| a * b).sum();
            for (r, &ub) in row.iter_mut().zip(&u) {
                *r -= dot * ub;
            }
        }
    }
    picked
}

/// Extracts `count` endmembers and solves per-pixel nonnegative abundances
/// with a heavily weighted sum-to-one row.
pub fn unmix<T: Scalar>(h: &Hsi<T>, count: usize) -> Result<AbundanceStack<T>> {
    let c = h.bands();
    let n = h.pixels();
    if count < 2 || count > c || count > n {
        return Err(Error::Argument(format!(
            "endmember count {count} must satisfy 2 <= N <= bands ({c}) and N <= pixels ({n})"
        )));
    }
    let picked = successive_projection(h, count);
    let mut endmembers = vec![T::zero(); c * count];
    for (k, &p) in picked.iter().enumerate() {
        for (b, &v) in h.pixel(p).iter().enumerate() {
            endmembers[b * count + k] = v;
        }
    }
    let em64: Vec<f64> = endmembers.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let mut gram = vec![0.0; count * count];
    for i in 0..count {
        for j in 0..count {
            gram[i * count + j] = (0..c).map(|b| em64[b * count + i] * em64[b * count + j]).sum();
        }
    }
    let scale = (0..count).fold(0.0f64, |m, i| m.max(gram[i * count + i]));
    let delta2 = SUM_TO_ONE_WEIGHT * SUM_TO_ONE_WEIGHT * scale.max(f64::MIN_POSITIVE);
    for g in gram.iter_mut() {
        *g += delta2;
    }
    let solved: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let x = h.pixel(p);
            let rhs: Vec<f64> = (0..count)
                .map(|k| (0..c).map(|b| em64[b * count + k] * x[b].to_f64().unwrap_or(f64::NAN)).sum::<f64>() + delta2)
                .collect();
            nnls_gram(&gram, count, &rhs).into_iter().map(T::of).collect()
        })
        .collect();
    let maps = (0..count)
        .map(|k| solved.iter().map(|a| a[k]).collect())
        .collect();
    Ok(AbundanceStack {
        height: h.height(),
        width: h.width(),
        maps,
        endmembers,
        endmember_pixels: picked,
        normalized: false,
    })
}
