use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hsi::{minmax_normalize, DegreeMap, Hsi, ScoreMap};
use crate::linalg::{cholesky, cholesky_solve};
use crate::scalar::Scalar;

use super::subspace::mean_and_covariance;

/// Ridge added to the covariance diagonal, relative to `trace / bands`.
pub const RIDGE_FACTOR: f64 = 1e-6;

/// Global background model for Mahalanobis scoring.
#[derive(Debug, Clone)]
pub struct MahalanobisModel<T = f64> {
    pub mean: Vec<T>,
    /// Lower Cholesky factor of the ridge-regularized covariance.
    chol: Vec<T>,
    pub ridge: T,
}

impl<T: Scalar> MahalanobisModel<T> {
    pub fn fit(h: &Hsi<T>) -> Result<Self> {
        let c = h.bands();
        if h.pixels() < c + 1 {
            return Err(Error::Argument(format!(
                "need at least {} pixels for {c} bands, got {}",
                c + 1,
                h.pixels()
            )));
        }
        let (mean, cov) = mean_and_covariance(h);
        Self::from_moments(mean, cov)
    }

    /// Builds the model from a mean and a covariance (row-major).
    pub fn from_moments(mean: Vec<T>, mut cov: Vec<T>) -> Result<Self> {
        let c = mean.len();
        let trace: T = (0..c).map(|i| cov[i * c + i]).sum();
        let mut ridge = T::of(RIDGE_FACTOR) * trace / T::of_usize(c);
        if !(ridge > T::zero()) {
            ridge = T::min_positive_value().sqrt();
        }
        for i in 0..c {
            cov[i * c + i] += ridge;
        }
        let chol = cholesky(&cov, c)?;
        Ok(Self { mean, chol, ridge })
    }

    /// `(x - mu)^T Sigma^-1 (x - mu)`
    pub fn distance(&self, x: &[T]) -> T {
        let c = self.mean.len();
        let d: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        let solved = cholesky_solve(&self.chol, c, &d);
        d.iter().zip(&solved).map(|(&a, &b)| a * b).sum::<T>().max(T::zero())
    }
}

/// Raw Mahalanobis distance of every pixel to the global background.
pub fn mahalanobis_scores<T: Scalar>(h: &Hsi<T>) -> Result<ScoreMap<T>> {
    let model = MahalanobisModel::fit(h)?;
    let values = (0..h.pixels())
        .into_par_iter()
        .map(|p| model.distance(h.pixel(p)))
        .collect();
    ScoreMap::new(h.height(), h.width(), values)
}

/// Min-max normalized Mahalanobis degree map.
pub fn statistical_mf<T: Scalar>(h: &Hsi<T>) -> Result<DegreeMap<T>> {
    Ok(minmax_normalize(&mahalanobis_scores(h)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn whitened_model_gives_unit_distance() {
        let c = 5;
        let model = MahalanobisModel::<f64>::from_moments(vec![0.0; c], {
            let mut id = vec![0.0; c * c];
            for i in 0..c {
                id[i * c + i] = 1.0;
            }
            id
        })
        .unwrap();
        for k in 0..c {
            let mut e = vec![0.0; c];
            e[k] = 1.0;
            // ridge is 1e-6 of unit variance
            assert!((model.distance(&e) - 1.0 / (1.0 + 1e-6)).abs() < 1e-12);
        }
    }

    #[test]
    fn whitened_sample_gives_unit_distance() {
        // +-a e_k has zero mean and identity sample covariance when a^2 = (n-1)/2
        let c = 4;
        let n = 2 * c;
        let a = (((n - 1) as f64) / 2.0).sqrt();
        let mut data = Vec::new();
        for k in 0..c {
            for s in [1.0, -1.0] {
                for b in 0..c {
                    data.push(if b == k { s * a } else { 0.0 });
                }
            }
        }
        let h = Hsi::new(1, n, c, data).unwrap();
        let model = MahalanobisModel::fit(&h).unwrap();
        let mut e = vec![0.0; c];
        e[2] = 1.0;
        assert!((model.distance(&e) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn gaussian_cube_mean_distance_near_band_count() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let h = Hsi::from_fn(32, 32, 10, |_, _, _| StandardNormal.sample(&mut rng)).unwrap();
        let s = mahalanobis_scores(&h).unwrap();
        let mean = s.values().iter().sum::<f64>() / s.values().len() as f64;
        assert!((mean - 10.0).abs() / 10.0 < 0.05, "mean {mean}");
    }

    #[test]
    fn duplicated_band_matches_dense_oracle_with_same_ridge() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let mut h = Hsi::from_fn(10, 10, 4, |_, _, _| StandardNormal.sample(&mut rng)).unwrap();
        let data: Vec<f64> = h
            .data()
            .chunks(4)
            .flat_map(|px| [px[0], px[0], px[2], px[3]])
            .collect();
        h = Hsi::new(10, 10, 4, data).unwrap();
        let s = mahalanobis_scores(&h).unwrap();
        assert!(s.values().iter().all(|v| v.is_finite()));

        let n = h.pixels();
        let x = DMatrix::from_fn(n, 4, |p, b| h.pixel(p)[b]);
        let mu = x.row_mean();
        let xc = DMatrix::from_fn(n, 4, |p, b| x[(p, b)] - mu[b]);
        let mut cov = xc.transpose() * &xc / (n as f64 - 1.0);
        let ridge = 1e-6 * cov.trace() / 4.0;
        for i in 0..4 {
            cov[(i, i)] += ridge;
        }
        let inv = cov.try_inverse().unwrap();
        for p in 0..n {
            let d = DVector::from_fn(4, |b, _| xc[(p, b)]);
            let want = (d.transpose() * &inv * &d)[(0, 0)];
            let got = s.values()[p];
            assert!((got - want).abs() <= 1e-8 * want.max(1.0), "pixel {p}: {got} vs {want}");
        }
    }

    #[test]
    fn affine_band_transform_invariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(14);
        let h = Hsi::from_fn(12, 12, 4, |_, _, _| StandardNormal.sample(&mut rng)).unwrap();
        let t = [[2.0, 0.3, 0.0, 0.1], [0.0, 1.5, -0.2, 0.0], [0.1, 0.0, 0.8, 0.3], [0.0, 0.2, 0.0, 1.2]];
        let shift = [5.0, -1.0, 0.5, 2.0];
        let data: Vec<f64> = h
            .data()
            .chunks(4)
            .flat_map(|px| {
                (0..4)
                    .map(|i| (0..4).map(|j| t[i][j] * px[j]).sum::<f64>() + shift[i])
                    .collect::<Vec<_>>()
            })
            .collect();
        let ht = Hsi::new(12, 12, 4, data).unwrap();
        let a: ScoreMap<f64> = mahalanobis_scores(&h).unwrap();
        let b = mahalanobis_scores(&ht).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-4 * x.max(1e-3));
        }
    }
}
