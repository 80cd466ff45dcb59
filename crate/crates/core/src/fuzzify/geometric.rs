use crate::error::{shape_err, Error, Result};
use crate::hsi::{gaussian_blur, minmax_values, DegreeMap, Hsi, ScoreMap};
use crate::linalg::{cholesky, cholesky_solve, singular_cutoff, symmetric_eigen, pinv_solve_sym};
use crate::scalar::Scalar;

use super::unmix::{unmix, AbundanceStack, DEFAULT_ENDMEMBERS};

/// Blur width used for the residual guidance map.
pub const DEFAULT_GUIDANCE_SIGMA: f64 = 5.0;

/// Scene-adaptive weights fusing abundance maps toward the guidance map.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvWeights<T = f64> {
    pub a: Vec<T>,
    /// True when the Gram matrix was rank deficient and the minimum-norm
    /// solution was returned.
    pub rank_deficient: bool,
}

/// Band-averaged absolute residual between the cube and its Gaussian blur.
pub fn guidance_map<T: Scalar>(h: &Hsi<T>, sigma: T) -> Result<ScoreMap<T>> {
    let blurred = gaussian_blur(h, sigma)?;
    let c = T::of_usize(h.bands());
    let values = (0..h.pixels())
        .map(|p| {
            h.pixel(p)
                .iter()
                .zip(blurred.pixel(p))
                .map(|(&a, &b)| (a - b).abs())
                .sum::<T>()
                / c
        })
        .collect();
    ScoreMap::new(h.height(), h.width(), values)
}

/// Least-squares weights minimizing `|M - sum_i a_i A_i|_F^2`.
pub fn learn_lpv<T: Scalar>(stack: &AbundanceStack<T>, m: &ScoreMap<T>) -> Result<LpvWeights<T>> {
    if stack.height != m.height() || stack.width != m.width() {
        return Err(shape_err(
            format!("{}x{}", stack.height, stack.width),
            format!("{}x{}", m.height(), m.width()),
        ));
    }
    let k = stack.count();
    if k == 0 {
        return Err(Error::Argument("abundance stack is empty".into()));
    }
    let mut gram = vec![T::zero(); k * k];
    let mut rhs = vec![T::zero(); k];
    for i in 0..k {
        rhs[i] = stack.maps[i].iter().zip(m.values()).map(|(&a, &v)| a * v).sum();
        for j in i..k {
            let g: T = stack.maps[i].iter().zip(&stack.maps[j]).map(|(&a, &b)| a * b).sum();
            gram[i * k + j] = g;
            gram[j * k + i] = g;
        }
    }
    let eig = symmetric_eigen(&gram, k)?;
    let lmax = eig.values[0].abs();
    let lmin = eig.values[k - 1];
    let singular = !(lmax > T::zero()) || lmin <= lmax * singular_cutoff::<T>(k);
    if !singular {
        if let Ok(l) = cholesky(&gram, k) {
            return Ok(LpvWeights {
                a: cholesky_solve(&l, k, &rhs),
                rank_deficient: false,
            });
        }
    }
    Ok(LpvWeights {
        a: pinv_solve_sym(&gram, k, &rhs)?,
        rank_deficient: true,
    })
}

/// `|M - sum_i a_i A_i|_F`.
pub fn lpv_residual<T: Scalar>(stack: &AbundanceStack<T>, m: &ScoreMap<T>, a: &[T]) -> T {
    (0..stack.pixels())
        .map(|p| {
            let fit: T = stack.maps.iter().zip(a).map(|(map, &w)| map[p] * w).sum();
            let r = m.values()[p] - fit;
            r * r
        })
        .sum::<T>()
        .sqrt()
}

/// Clamped weighted abundance sum, Hadamard with the guidance map, normalized.
pub fn compose_geometric<T: Scalar>(stack: &AbundanceStack<T>, m: &ScoreMap<T>, a: &[T]) -> Result<DegreeMap<T>> {
    let raw: Vec<T> = (0..stack.pixels())
        .map(|p| {
            let s: T = stack.maps.iter().zip(a).map(|(map, &w)| map[p] * w).sum();
            s.max(T::zero()) * m.values()[p]
        })
        .collect();
    DegreeMap::new(stack.height, stack.width, minmax_values(&raw))
}

/// Geometric degree map with default settings (4 endmembers, sigma 5).
pub fn geometrical_mf<T: Scalar>(h: &Hsi<T>) -> Result<DegreeMap<T>> {
    geometrical_mf_with(h, DEFAULT_ENDMEMBERS, T::of(DEFAULT_GUIDANCE_SIGMA))
}

pub fn geometrical_mf_with<T: Scalar>(h: &Hsi<T>, endmembers: usize, sigma: T) -> Result<DegreeMap<T>> {
    let stack = unmix(h, endmembers)?.normalized();
    let m = guidance_map(h, sigma)?;
    let w = learn_lpv(&stack, &m)?;
    compose_geometric(&stack, &m, &w.a)
}
