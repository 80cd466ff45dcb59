//! Energy-contrast enhancement `1 - exp(-alpha C)` with `alpha` fitted by
//! gradient descent toward the highest-energy membership map.

use crate::error::Result;
use crate::hsi::DegreeMap;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcSettings {
    pub alpha0: f64,
    pub learning_rate: f64,
    pub max_iter: usize,
}

impl Default for EcSettings {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            learning_rate: 2.0,
            max_iter: 10_000,
        }
    }
}

/// Nonnegative enhancement factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcFactor<T = f64> {
    pub alpha: T,
}

/// Result of the descent, including the objective after every accepted step.
#[derive(Debug, Clone)]
pub struct EcFit<T = f64> {
    pub factor: EcFactor<T>,
    pub iterations: usize,
    pub objective_trace: Vec<T>,
}

pub fn ec_objective<T: Scalar>(c: &[T], fmax: &[T], alpha: T) -> T {
    c.iter()
        .zip(fmax)
        .map(|(&ci, &fi)| {
            let r = T::one() - (-alpha * ci).exp() - fi;
            r * r
        })
        .sum::<T>()
        * T::of(0.5)
}

pub fn ec_gradient<T: Scalar>(c: &[T], fmax: &[T], alpha: T) -> T {
    c.iter()
        .zip(fmax)
        .map(|(&ci, &fi)| {
            let e = (-alpha * ci).exp();
            (T::one() - e - fi) * ci * e
        })
        .sum()
}

/// Gradient descent from `alpha0` with the configured rate; the step is halved
/// whenever it would increase the objective. Stops when the gradient falls
/// below `1e-10` per pixel, then projects onto `alpha >= 0`.
pub fn fit_ec_alpha<T: Scalar>(c: &DegreeMap<T>, fmax: &DegreeMap<T>, settings: &EcSettings) -> Result<EcFit<T>> {
    c.ensure_same_shape(fmax)?;
    let (cv, fv) = (c.values(), fmax.values());
    let stop = T::of(1e-10) * T::of_usize(c.len());
    let mut alpha = T::of(settings.alpha0);
    let mut step = T::of(settings.learning_rate);
    let mut obj = ec_objective(cv, fv, alpha);
    let mut trace = vec![obj];
    let mut iterations = 0;
    'outer: for it in 0..settings.max_iter {
        iterations = it;
        let g = ec_gradient(cv, fv, alpha);
        if g.abs() < stop {
            break;
        }
        loop {
            let cand = alpha - step * g;
            let oc = ec_objective(cv, fv, cand);
            if oc <= obj {
                alpha = cand;
                obj = oc;
                trace.push(obj);
                break;
            }
            step = step * T::of(0.5);
            if step < T::epsilon() * T::epsilon() {
                break 'outer;
            }
        }
        iterations = it + 1;
    }
    Ok(EcFit {
        factor: EcFactor { alpha: alpha.max(T::zero()) },
        iterations,
        objective_trace: trace,
    })
}

/// Elementwise `1 - exp(-alpha C)`.
pub fn ec_enhance<T: Scalar>(c: &DegreeMap<T>, factor: EcFactor<T>) -> Result<DegreeMap<T>> {
    let alpha = factor.alpha.max(T::zero());
    c.map(|v| T::one() - (-alpha * v).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fill(v: f64) -> DegreeMap<f64> {
        DegreeMap::filled(4, 4, v).unwrap()
    }

    #[test]
    fn stationary_point_at_one() {
        let fit = fit_ec_alpha(&fill(1.0), &fill(1.0 - (-1.0f64).exp()), &EcSettings::default()).unwrap();
        assert!((fit.factor.alpha - 1.0).abs() < 1e-4);
    }

    #[test]
    fn half_target_gives_ln2() {
        let fit = fit_ec_alpha(&fill(1.0), &fill(0.5), &EcSettings::default()).unwrap();
        assert!((fit.factor.alpha - std::f64::consts::LN_2).abs() < 1e-4);
    }

    #[test]
    fn zero_target_projects_to_zero() {
        let fit = fit_ec_alpha(&fill(0.6), &fill(0.0), &EcSettings::default()).unwrap();
        assert!(fit.factor.alpha >= 0.0 && fit.factor.alpha < 1e-6, "alpha {}", fit.factor.alpha);
    }

    #[test]
    fn objective_never_increases() {
        let c = DegreeMap::new(2, 3, vec![0.1, 0.5, 0.9, 0.3, 0.0, 1.0]).unwrap();
        let f = DegreeMap::new(2, 3, vec![0.2, 0.4, 0.95, 0.1, 0.05, 0.8]).unwrap();
        let fit = fit_ec_alpha(&c, &f, &EcSettings::default()).unwrap();
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        // gradient as printed vs central differences
        let a = 0.7f64;
        let h = 1e-6;
        let fd = (ec_objective(c.values(), f.values(), a + h) - ec_objective(c.values(), f.values(), a - h)) / (2.0 * h);
        assert!((fd - ec_gradient(c.values(), f.values(), a)).abs() < 1e-8);
    }

    #[test]
    fn enhance_examples() {
        let c = DegreeMap::new(1, 3, vec![0.0, 0.5, 1.0]).unwrap();
        assert!(ec_enhance(&c, EcFactor { alpha: 0.0 }).unwrap().values().iter().all(|&v| v == 0.0));
        let out = ec_enhance(&c, EcFactor { alpha: std::f64::consts::LN_2 }).unwrap();
        assert!((out.values()[2] - 0.5).abs() < 1e-12);
        assert!(out.values()[0] <= out.values()[1] && out.values()[1] <= out.values()[2]);
    }
}
