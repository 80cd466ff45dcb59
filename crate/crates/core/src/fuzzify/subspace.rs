use crate::error::{Error, Result};
use crate::hsi::Hsi;
use crate::linalg::symmetric_eigen;
use crate::scalar::Scalar;

/// Standardized principal-component scores of a cube.
#[derive(Debug, Clone)]
pub struct PrincipalStack<T = f64> {
    pub height: usize,
    pub width: usize,
    /// One z-scored score map per component, row-major.
    pub components: Vec<Vec<T>>,
    /// `bands x count`, row-major; columns are orthonormal.
    pub loadings: Vec<T>,
    pub mean_spectrum: Vec<T>,
    pub eigenvalues: Vec<T>,
    /// Standard deviation removed from each raw score map.
    pub score_scale: Vec<T>,
    /// Components whose variance is negligible; their score maps are zero.
    pub degenerate: Vec<bool>,
}

impl<T: Scalar> PrincipalStack<T> {
    pub fn count(&self) -> usize {
        self.components.len()
    }

    pub fn bands(&self) -> usize {
        self.mean_spectrum.len()
    }

    #[inline]
    pub fn loading(&self, band: usize, k: usize) -> T {
        self.loadings[band * self.count() + k]
    }

    /// `mean + loadings * raw_scores` for every pixel, row-major `(pixel, band)`.
    pub fn reconstruct(&self) -> Vec<T> {
        let n = self.height * self.width;
        let c = self.bands();
        let mut out = Vec::with_capacity(n * c);
        for p in 0..n {
            for b in 0..c {
                let mut v = self.mean_spectrum[b];
                for k in 0..self.count() {
                    let raw = self.components[k][p] * self.score_scale[k];
                    v += self.loading(b, k) * raw;
                }
                out.push(v);
            }
        }
        out
    }
}

/// Per-band mean and unbiased sample covariance (`bands x bands`, row-major).
pub(crate) fn mean_and_covariance<T: Scalar>(h: &Hsi<T>) -> (Vec<T>, Vec<T>) {
    let n = h.pixels();
    let c = h.bands();
    let mut mean = vec![T::zero(); c];
    for p in 0..n {
        for (m, &v) in mean.iter_mut().zip(h.pixel(p)) {
            *m += v;
        }
    }
    let nf = T::of_usize(n);
    for m in mean.iter_mut() {
        *m /= nf;
    }
    let mut cov = vec![T::zero(); c * c];
    let mut centered = vec![T::zero(); c];
    for p in 0..n {
        for (b, (&v, &m)) in h.pixel(p).iter().zip(&mean).enumerate() {
            centered[b] = v - m;
        }
        for i in 0..c {
            let ci = centered[i];
            for j in i..c {
                cov[i * c + j] += ci * centered[j];
            }
        }
    }
    let denom = T::of_usize(n.saturating_sub(1).max(1));
    for i in 0..c {
        for j in i..c {
            let v = cov[i * c + j] / denom;
            cov[i * c + j] = v;
            cov[j * c + i] = v;
        }
    }
    (mean, cov)
}

/// Projects mean-centred pixels onto the top-`count` covariance eigenvectors
/// and z-scores each component.
pub fn subspace_project<T: Scalar>(h: &Hsi<T>, count: usize) -> Result<PrincipalStack<T>> {
    let c = h.bands();
    let n = h.pixels();
    if count == 0 || count > c {
        return Err(Error::Argument(format!(
            "component count {count} must be in 1..={c} (band count)"
        )));
    }
    if n < count + 1 {
        return Err(Error::Argument(format!(
            "need at least {} pixels for {count} components, got {n}",
            count + 1
        )));
    }
    let (mean, cov) = mean_and_covariance(h);
    let eig = symmetric_eigen(&cov, c)?;
    let trace: T = (0..c).map(|i| cov[i * c + i]).sum();
    let degenerate_cut = trace.abs() * T::of(1e-12);

    let mut loadings = vec![T::zero(); c * count];
    for k in 0..count {
        // deterministic sign: largest-magnitude entry positive
        let pivot = (0..c)
            .max_by(|&a, &b| {
                eig.vector_component(a, k)
                    .abs()
                    .partial_cmp(&eig.vector_component(b, k).abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .unwrap_or(0);
        let sign = if eig.vector_component(pivot, k) < T::zero() { -T::one() } else { T::one() };
        for b in 0..c {
            loadings[b * count + k] = sign * eig.vector_component(b, k);
        }
    }

    let mut components = Vec::with_capacity(count);
    let mut score_scale = Vec::with_capacity(count);
    let mut degenerate = Vec::with_capacity(count);
    for k in 0..count {
        let mut scores: Vec<T> = (0..n)
            .map(|p| {
                h.pixel(p)
                    .iter()
                    .zip(&mean)
                    .enumerate()
                    .map(|(b, (&v, &m))| (v - m) * loadings[b * count + k])
                    .sum()
            })
            .collect();
        let mu: T = scores.iter().copied().sum::<T>() / T::of_usize(n);
        let var: T = scores.iter().map(|&s| (s - mu) * (s - mu)).sum::<T>() / T::of_usize(n);
        if eig.values[k] <= degenerate_cut || !(var > T::zero()) {
            scores.iter_mut().for_each(|s| *s = T::zero());
            components.push(scores);
            score_scale.push(T::zero());
            degenerate.push(true);
            continue;
        }
        let sd = var.sqrt();
        for s in scores.iter_mut() {
            *s = (*s - mu) / sd;
        }
        components.push(scores);
        score_scale.push(sd);
        degenerate.push(false);
    }
    Ok(PrincipalStack {
        height: h.height(),
        width: h.width(),
        components,
        loadings,
        mean_spectrum: mean,
        eigenvalues: eig.values[..count].to_vec(),
        score_scale,
        degenerate,
    })
}
