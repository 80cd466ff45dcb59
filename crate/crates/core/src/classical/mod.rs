//! Unsupervised rule-based decision engine producing the classical detection
//! map from the three membership degree maps.

pub mod ec;
pub mod guided;
pub mod kmeans;

pub use ec::{ec_enhance, ec_gradient, ec_objective, fit_ec_alpha, EcFactor, EcFit, EcSettings};
pub use guided::{box_mean, guided_filter};
pub use kmeans::{kmeans_binarize, two_means_threshold};

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::fuzzify::{fuzzify, DegreeMaps, FuzzifyConfig};
use crate::fuzzy::OperatorPair;
use crate::hsi::{DegreeMap, Hsi, Mask};
use crate::scalar::Scalar;

/// Conclusions of the five rules.
#[derive(Debug, Clone)]
pub struct RuleConclusions<T = f64> {
    /// Rules R1 (M, S), R2 (M, G), R3 (G, S).
    pub soft: [DegreeMap<T>; 3],
    /// Matching degree of "all properties hold" before binarization.
    pub all_match: DegreeMap<T>,
    /// Matching degree of "no property holds" before binarization.
    pub none_match: DegreeMap<T>,
    pub crisp_anomaly: Mask,
    pub crisp_background: Mask,
}

pub fn match_rules<T: Scalar>(
    fm: &DegreeMap<T>,
    fg: &DegreeMap<T>,
    fs: &DegreeMap<T>,
    ops: OperatorPair,
) -> Result<RuleConclusions<T>> {
    fm.ensure_same_shape(fg)?;
    fm.ensure_same_shape(fs)?;
    let r1 = fm.zip_with(fs, |a, b| ops.t_norm(a, b))?;
    let r2 = fm.zip_with(fg, |a, b| ops.t_norm(a, b))?;
    let r3 = fg.zip_with(fs, |a, b| ops.t_norm(a, b))?;
    let all_match = r2.zip_with(fs, |a, b| ops.t_norm(a, b))?;
    let n = fm.len();
    let none: Vec<T> = (0..n)
        .map(|i| {
            let (m, g, s) = (fm.values()[i], fg.values()[i], fs.values()[i]);
            ops.t_norm(ops.t_norm(T::one() - m, T::one() - g), T::one() - s)
        })
        .collect();
    let none_match = DegreeMap::new(fm.height(), fm.width(), none)?;
    Ok(RuleConclusions {
        crisp_anomaly: kmeans_binarize(&all_match),
        crisp_background: kmeans_binarize(&none_match),
        soft: [r1, r2, r3],
        all_match,
        none_match,
    })
}

/// Pairwise Einstein-sum integration followed by equal-confidence voting.
pub fn cross_integrate<T: Scalar>(c1: &DegreeMap<T>, c2: &DegreeMap<T>, c3: &DegreeMap<T>) -> Result<DegreeMap<T>> {
    cross_integrate_with(OperatorPair::Einstein, c1, c2, c3)
}

/// As [`cross_integrate`] with the disjunction taken from `ops`.
pub fn cross_integrate_with<T: Scalar>(
    ops: OperatorPair,
    r1: &DegreeMap<T>,
    r2: &DegreeMap<T>,
    r3: &DegreeMap<T>,
) -> Result<DegreeMap<T>> {
    r1.ensure_same_shape(r2)?;
    r1.ensure_same_shape(r3)?;
    let third = T::one() / T::of(3.0);
    let values = (0..r1.len())
        .map(|i| {
            let (a, b, c) = (r1.values()[i], r2.values()[i], r3.values()[i]);
            (ops.t_conorm(a, c) + ops.t_conorm(a, b) + ops.t_conorm(b, c)) * third
        })
        .collect();
    DegreeMap::new(r1.height(), r1.width(), values)
}

fn ranked<T: Scalar>(values: &[T], descending: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal);
        let ord = if descending { ord.reverse() } else { ord };
        ord.then(a.cmp(&b))
    });
    idx
}

/// Forces `1` on anomaly-mask pixels among the `ceil(e1 |A|)` largest values
/// and `0` on background-mask pixels among the `ceil(e2 |B|)` smallest.
/// A pixel claimed by both keeps the anomaly assignment.
pub fn index_combine<T: Scalar>(cbar: &DegreeMap<T>, mask_a: &Mask, mask_b: &Mask, e1: f64, e2: f64) -> Result<DegreeMap<T>> {
    for m in [mask_a, mask_b] {
        if m.height() != cbar.height() || m.width() != cbar.width() {
            return Err(crate::error::shape_err(
                format!("{}x{}", cbar.height(), cbar.width()),
                format!("{}x{}", m.height(), m.width()),
            ));
        }
    }
    for (name, e) in [("e1", e1), ("e2", e2)] {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::Argument(format!("{name} must lie in [0, 1], got {e}")));
        }
    }
    let v = cbar.values();
    let k1 = (e1 * mask_a.count_ones() as f64).ceil() as usize;
    let k2 = (e2 * mask_b.count_ones() as f64).ceil() as usize;
    let mut out = v.to_vec();
    for &i in ranked(v, false).iter().take(k2) {
        if mask_b.values()[i] {
            out[i] = T::zero();
        }
    }
    for &i in ranked(v, true).iter().take(k1) {
        if mask_a.values()[i] {
            out[i] = T::one();
        }
    }
    DegreeMap::new(cbar.height(), cbar.width(), out)
}

/// Index (0 = M, 1 = G, 2 = S) of the map with the largest sum of squares;
/// ties go to the earlier map.
pub fn select_fmax_index<T: Scalar>(fm: &DegreeMap<T>, fg: &DegreeMap<T>, fs: &DegreeMap<T>) -> usize {
    let energies = [fm.energy(), fg.energy(), fs.energy()];
    let mut best = 0;
    for k in 1..3 {
        if energies[k] > energies[best] {
            best = k;
        }
    }
    best
}

pub fn select_fmax<T: Scalar>(fm: &DegreeMap<T>, fg: &DegreeMap<T>, fs: &DegreeMap<T>) -> DegreeMap<T> {
    [fm, fg, fs][select_fmax_index(fm, fg, fs)].clone()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalConfig {
    pub fuzzify: FuzzifyConfig,
    pub ops: OperatorPair,
    pub e1: f64,
    pub e2: f64,
    pub radius: usize,
    pub eps: f64,
    pub ec: EcSettings,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            fuzzify: FuzzifyConfig::default(),
            ops: OperatorPair::Einstein,
            e1: 0.2,
            e2: 0.2,
            radius: 4,
            eps: 1e-3,
            ec: EcSettings::default(),
        }
    }
}

/// Every intermediate of one classical run.
#[derive(Debug, Clone)]
pub struct ClassicalReport<T = f64> {
    pub rules: RuleConclusions<T>,
    pub integrated: DegreeMap<T>,
    pub combined: DegreeMap<T>,
    pub fmax_index: usize,
    pub ec: EcFit<T>,
    pub enhanced: DegreeMap<T>,
    pub detection: DegreeMap<T>,
}

/// Classical stages on precomputed membership maps.
pub fn classical_from_maps<T: Scalar>(maps: &DegreeMaps<T>, cfg: &ClassicalConfig) -> Result<ClassicalReport<T>> {
    let [fm, fg, fs] = maps.as_array();
    let rules = match_rules(fm, fg, fs, cfg.ops)?;
    let [r1, r2, r3] = &rules.soft;
    let integrated = cross_integrate_with(cfg.ops, r1, r2, r3)?;
    let combined = index_combine(&integrated, &rules.crisp_anomaly, &rules.crisp_background, cfg.e1, cfg.e2)?;
    let fmax_index = select_fmax_index(fm, fg, fs);
    let ec = fit_ec_alpha(&combined, maps.as_array()[fmax_index], &cfg.ec)?;
    let enhanced = ec_enhance(&combined, ec.factor)?;
    let detection = guided_filter(&enhanced, &enhanced, cfg.radius, T::of(cfg.eps))?;
    Ok(ClassicalReport {
        rules,
        integrated,
        combined,
        fmax_index,
        ec,
        enhanced,
        detection,
    })
}

/// Full classical pipeline: fuzzify, match, integrate, combine, enhance, filter.
pub fn classical_detect<T: Scalar>(h: &Hsi<T>, cfg: &ClassicalConfig) -> Result<DegreeMap<T>> {
    let maps = fuzzify(h, &cfg.fuzzify)?;
    Ok(classical_from_maps(&maps, cfg)?.detection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn fill(v: f64) -> DegreeMap<f64> {
        DegreeMap::filled(3, 3, v).unwrap()
    }

    fn random_map(h: usize, w: usize, rng: &mut impl Rng) -> DegreeMap<f64> {
        DegreeMap::new(h, w, (0..h * w).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn all_one_maps() {
        let one = fill(1.0);
        let r = match_rules(&one, &one, &one, OperatorPair::Einstein).unwrap();
        for m in &r.soft {
            assert!(m.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        }
        // constant matching maps binarize to zero; the degrees themselves are exact
        assert!(r.all_match.values().iter().all(|&v| v == 1.0));
        assert!(r.none_match.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn half_degrees_chain() {
        let h = fill(0.5);
        let r = match_rules(&h, &h, &h, OperatorPair::Einstein).unwrap();
        assert!((r.soft[0].values()[0] - 0.2).abs() < 1e-15);
        assert!((r.all_match.values()[0] - 0.1 / 1.4).abs() < 1e-15);
    }

    #[test]
    fn minmax_rules_use_min() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (m, g, s) = (random_map(5, 5, &mut rng), random_map(5, 5, &mut rng), random_map(5, 5, &mut rng));
        let r = match_rules(&m, &g, &s, OperatorPair::MinMax).unwrap();
        for i in 0..25 {
            assert_eq!(r.soft[0].values()[i], m.values()[i].min(s.values()[i]));
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = fill(0.5);
        let b = DegreeMap::filled(3, 4, 0.5).unwrap();
        assert!(match_rules(&a, &a, &b, OperatorPair::Einstein).is_err());
        assert!(cross_integrate(&a, &b, &a).is_err());
    }

    #[test]
    fn cross_integrate_examples() {
        let z = fill(0.0);
        assert!(cross_integrate(&z, &z, &z).unwrap().values().iter().all(|&v| v == 0.0));
        let h = fill(0.5);
        assert!(cross_integrate(&h, &h, &h).unwrap().values().iter().all(|&v| (v - 0.8).abs() < 1e-15));
        let one = fill(1.0);
        let (b, c) = (fill(0.3), fill(0.6));
        let s = (0.3 + 0.6) / (1.0 + 0.18);
        let out = cross_integrate(&one, &b, &c).unwrap();
        assert!((out.values()[0] - (2.0 + s) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn index_combine_examples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let cbar = random_map(4, 4, &mut rng);
        let none = Mask::zeros(4, 4);
        assert_eq!(index_combine(&cbar, &none, &none, 0.2, 0.2).unwrap(), cbar);

        let top = (0..16).max_by(|&a, &b| cbar.values()[a].partial_cmp(&cbar.values()[b]).unwrap()).unwrap();
        let mut a = Mask::zeros(4, 4);
        a.values_mut()[top] = true;
        let out = index_combine(&cbar, &a, &none, 1.0, 0.2).unwrap();
        assert_eq!(out.values()[top], 1.0);

        // pixel in both branches: anomaly wins
        let mut both = Mask::zeros(4, 4);
        both.values_mut().iter_mut().for_each(|v| *v = true);
        let out = index_combine(&cbar, &both, &both, 1.0, 1.0).unwrap();
        assert!(out.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn select_fmax_examples() {
        let (one, zero) = (fill(1.0), fill(0.0));
        assert_eq!(select_fmax_index(&one, &zero, &zero), 0);
        let m = DegreeMap::new(1, 4, vec![1.0; 4]).unwrap();
        let g = m.clone();
        let s = DegreeMap::new(1, 4, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(select_fmax_index(&m, &g, &s), 0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let maps = [random_map(6, 6, &mut rng), random_map(6, 6, &mut rng), random_map(6, 6, &mut rng)];
            let e: Vec<f64> = maps.iter().map(|m| m.values().iter().map(|v| v * v).sum()).collect();
            let want = (0..3).fold(0, |b, k| if e[k] > e[b] { k } else { b });
            assert_eq!(select_fmax(&maps[0], &maps[1], &maps[2]), maps[want]);
        }
    }

    #[test]
    fn constant_cube_yields_zero_detection() {
        let h = Hsi::from_fn(12, 12, 6, |_, _, b| 0.2 + 0.05 * b as f64).unwrap();
        let d = classical_detect(&h, &ClassicalConfig::default()).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn operator_pair_changes_output_and_run_is_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let h = Hsi::from_fn(16, 16, 6, |_, _, _| rng.gen_range(0.1..0.9)).unwrap();
        let cfg = ClassicalConfig::default();
        let a = classical_detect(&h, &cfg).unwrap();
        let b = classical_detect(&h, &cfg).unwrap();
        assert_eq!(a.values(), b.values());
        let mm = classical_detect(&h, &ClassicalConfig { ops: OperatorPair::MinMax, ..cfg }).unwrap();
        assert_ne!(a.values(), mm.values());
    }
}
