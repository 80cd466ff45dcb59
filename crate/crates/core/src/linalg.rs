//! Small dense linear algebra on row-major slices: symmetric eigensolver,
//! Cholesky, pseudo-inverse solves and Gram-form NNLS.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Eigenvalues in descending order.
    pub values: Vec<T>,
    /// Row-major `n x n`; column `k` is the eigenvector of `values[k]`.
    pub vectors: Vec<T>,
    pub n: usize,
}

impl<T: Scalar> SymmetricEigen<T> {
    #[inline]
    pub fn vector_component(&self, row: usize, k: usize) -> T {
        self.vectors[row * self.n + k]
    }
}

/// Cyclic Jacobi eigensolver for a symmetric row-major `n x n` matrix.
pub fn symmetric_eigen<T: Scalar>(matrix: &[T], n: usize) -> Result<SymmetricEigen<T>> {
    if matrix.len() != n * n {
        return Err(Error::Argument(format!("expected {} entries for {n}x{n}", n * n)));
    }
    let mut a = matrix.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let frob: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let tol = T::epsilon() * frob.max(T::min_positive_value());
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<T>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (new_k, &old_k) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + new_k] = v[row * n + old_k];
        }
    }
    Ok(SymmetricEigen { values, vectors, n })
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Scalar>(matrix: &[T], n: usize) -> Result<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = matrix[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > T::zero()) {
                    return Err(Error::Degenerate("matrix is not positive definite".into()));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the Cholesky factor.
pub fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Relative eigenvalue cut-off below which a Gram matrix counts as singular.
pub fn singular_cutoff<T: Scalar>(n: usize) -> T {
    T::epsilon() * T::of_usize(n.max(1)) * T::of(1e3)
}

/// Minimum-norm solution of `G x = r` for symmetric positive semidefinite `G`.
pub fn pinv_solve_sym<T: Scalar>(gram: &[T], n: usize, rhs: &[T]) -> Result<Vec<T>> {
    let eig = symmetric_eigen(gram, n)?;
    let lmax = eig.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let cut = lmax * singular_cutoff::<T>(n);
    let mut x = vec![T::zero(); n];
    for k in 0..n {
        let lambda = eig.values[k];
        if lambda <= cut {
            continue;
        }
        let proj: T = (0..n).map(|i| eig.vector_component(i, k) * rhs[i]).sum();
        let coef = proj / lambda;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += coef * eig.vector_component(i, k);
        }
    }
    Ok(x)
}

/// Nonnegative least squares in Gram form: minimizes `x^T G x / 2 - r^T x`
/// subject to `x >= 0` (Lawson-Hanson active set), where `G = A^T A` and
/// `r = A^T b`.
pub fn nnls_gram<T: Scalar>(gram: &[T], n: usize, rhs: &[T]) -> Vec<T> {
    let scale = (0..n).fold(T::zero(), |m, i| m.max(gram[i * n + i].abs()));
    let tol = T::epsilon() * T::of(1e3) * scale.max(T::one()) * T::of_usize(n);
    let mut x = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let gradient = |x: &[T]| -> Vec<T> {
        (0..n)
            .map(|i| rhs[i] - (0..n).map(|j| gram[i * n + j] * x[j]).sum::<T>())
            .collect()
    };
    let mut w = gradient(&x);
    for _outer in 0..(3 * n + 3) {
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap_or(std::cmp::Ordering::Equal));
        let Some(t) = candidate else { break };
        passive[t] = true;
        for _inner in 0..(3 * n + 3) {
            let z = solve_subset(gram, n, rhs, &passive);
            if (0..n).all(|j| !passive[j] || z[j] > T::zero()) {
                x = z;
                break;
            }
            let mut alpha = T::one();
            for j in 0..n {
                if passive[j] && z[j] <= T::zero() {
                    let denom = x[j] - z[j];
                    if denom > T::zero() {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            for j in 0..n {
                x[j] = x[j] + alpha * (z[j] - x[j]);
                if passive[j] && x[j] <= tol.min(T::epsilon()) {
                    passive[j] = false;
                    x[j] = T::zero();
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        w = gradient(&x);
    }
    x
}

fn solve_subset<T: Scalar>(gram: &[T], n: usize, rhs: &[T], passive: &[bool]) -> Vec<T> {
    let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
    let m = idx.len();
    let mut sub = vec![T::zero(); m * m];
    let mut r = vec![T::zero(); m];
    for (a, &i) in idx.iter().enumerate() {
        r[a] = rhs[i];
        for (b, &j) in idx.iter().enumerate() {
            sub[a * m + b] = gram[i * n + j];
        }
    }
    let sol = match cholesky(&sub, m) {
        Ok(l) => cholesky_solve(&l, m, &r),
        Err(_) => pinv_solve_sym(&sub, m, &r).unwrap_or_else(|_| vec![T::zero(); m]),
    };
    let mut z = vec![T::zero(); n];
    for (a, &i) in idx.iter().enumerate() {
        z[i] = sol[a];
    }
    z
}
