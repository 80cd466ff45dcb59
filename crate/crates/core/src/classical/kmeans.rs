use std::cmp::Ordering;

use crate::hsi::{DegreeMap, Mask};
use crate::scalar::Scalar;

/// Two-cluster split of scalar values minimizing within-cluster squared error.
///
/// In one dimension every 2-means partition is a threshold on the sorted
/// values, so scanning the `n - 1` splits with prefix sums yields the global
/// optimum that Lloyd iterations started from the extremes aim for. Values at
/// or above the returned threshold form the high cluster. Returns `None` for
/// constant input.
pub fn two_means_threshold<T: Scalar>(values: &[T]) -> Option<T> {
    let mut sorted: Vec<f64> = values.iter().map(|v| v.as_f64()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = sorted.len();
    if n < 2 || sorted[0] == sorted[n - 1] {
        return None;
    }
    let mut prefix = vec![0.0f64; n + 1];
    let mut prefix_sq = vec![0.0f64; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    let sse = |lo: usize, hi: usize| -> f64 {
        let k = (hi - lo) as f64;
        let s = prefix[hi] - prefix[lo];
        (prefix_sq[hi] - prefix_sq[lo]) - s * s / k
    };
    let mut best: Option<(f64, usize)> = None;
    for split in 1..n {
        // ties stay together
        if sorted[split] == sorted[split - 1] {
            continue;
        }
        let cost = sse(0, split) + sse(split, n);
        if best.map_or(true, |(b, _)| cost < b) {
            best = Some((cost, split));
        }
    }
    best.map(|(_, split)| T::of(sorted[split]))
}

/// 1-D 2-means binarization; the cluster with the larger centre maps to 1.
pub fn kmeans_binarize<T: Scalar>(m: &DegreeMap<T>) -> Mask {
    let values = match two_means_threshold(m.values()) {
        None => vec![false; m.len()],
        Some(t) => m.values().iter().map(|&v| v >= t).collect(),
    };
    Mask::new(m.height(), m.width(), values).expect("shape preserved")
}
