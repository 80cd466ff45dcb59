//! Area attribute opening and closing on 8-connected grayscale planes.
//!
//! Union-find over pixels sorted by level (Meijster-Wilkinson). A component is
//! kept at a level once its area reaches the threshold; smaller peaks are
//! flattened down to the level at which they merge into a large enough one.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::hsi::{minmax_values, DegreeMap, Hsi};
use crate::scalar::Scalar;

use super::subspace::subspace_project;

/// Components retained by the morphological degree map.
pub const DEFAULT_COMPONENTS: usize = 3;

/// 0.1% of the pixel count, at least 4.
pub fn default_area_threshold(pixels: usize) -> usize {
    ((pixels as f64 * 1e-3).round() as usize).max(4)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    let mut root = x;
    while parent[root] != root {
        root = parent[root];
    }
    while parent[x] != root {
        let next = parent[x];
        parent[x] = root;
        x = next;
    }
    root
}

/// Area opening: removes bright 8-connected structures smaller than
/// `area_threshold` pixels.
pub fn area_opening<T: Scalar>(values: &[T], height: usize, width: usize, area_threshold: usize) -> Vec<T> {
    let n = values.len();
    assert_eq!(n, height * width, "plane length must match dimensions");
    if area_threshold <= 1 || n == 0 {
        return values.to_vec();
    }
    let mut order: Vec<usize> = (0..n).collect();
    // decreasing level, ties by index
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    const UNSEEN: usize = usize::MAX;
    let mut parent = vec![UNSEEN; n];
    let mut area = vec![0usize; n];
    for &p in &order {
        parent[p] = p;
        area[p] = 1;
        let (r, c) = ((p / width) as isize, (p % width) as isize);
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= height as isize || cc >= width as isize {
                    continue;
                }
                let q = rr as usize * width + cc as usize;
                if parent[q] == UNSEEN {
                    continue;
                }
                let root = find(&mut parent, q);
                if root == p {
                    continue;
                }
                if values[root] == values[p] || area[root] < area_threshold {
                    parent[root] = p;
                    area[p] = area[p].saturating_add(area[root]);
                } else {
                    area[p] = area_threshold;
                }
            }
        }
    }
    let mut out = vec![T::zero(); n];
    for &p in order.iter().rev() {
        let q = parent[p];
        out[p] = if q == p { values[p] } else { out[q] };
    }
    out
}

/// Area closing: the dual of [`area_opening`] under negation.
pub fn area_closing<T: Scalar>(values: &[T], height: usize, width: usize, area_threshold: usize) -> Vec<T> {
    let neg: Vec<T> = values.iter().map(|&v| -v).collect();
    area_opening(&neg, height, width, area_threshold)
        .into_iter()
        .map(|v| -v)
        .collect()
}

/// Morphological degree map from the default three principal components.
pub fn morphological_mf<T: Scalar>(h: &Hsi<T>, area_threshold: usize) -> Result<DegreeMap<T>> {
    morphological_mf_with(h, DEFAULT_COMPONENTS.min(h.bands()), area_threshold)
}

/// Accumulates `|p - O(p)| + |p - C(p)|` over `components` min-max rescaled
/// principal components, then min-max normalizes.
pub fn morphological_mf_with<T: Scalar>(
    h: &Hsi<T>,
    components: usize,
    area_threshold: usize,
) -> Result<DegreeMap<T>> {
    if area_threshold == 0 {
        return Err(Error::Argument("area threshold must be at least 1".into()));
    }
    let stack = subspace_project(h, components)?;
    let (height, width) = (h.height(), h.width());
    let mut acc = vec![T::zero(); h.pixels()];
    for comp in &stack.components {
        let plane = minmax_values(comp);
        let opened = area_opening(&plane, height, width, area_threshold);
        let closed = area_closing(&plane, height, width, area_threshold);
        for (i, a) in acc.iter_mut().enumerate() {
            *a += (plane[i] - opened[i]).abs() + (plane[i] - closed[i]).abs();
        }
    }
    DegreeMap::new(height, width, minmax_values(&acc))
}

#[cfg(test)]
pub(crate) mod oracle {
    use crate::scalar::Scalar;

    fn label_components(set: &[bool], height: usize, width: usize) -> Vec<Vec<usize>> {
        let mut seen = vec![false; set.len()];
        let mut comps = Vec::new();
        for start in 0..set.len() {
            if !set[start] || seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut comp = Vec::new();
            while let Some(p) = stack.pop() {
                comp.push(p);
                let (r, c) = ((p / width) as isize, (p % width) as isize);
                for dr in -1isize..=1 {
                    for dc in -1isize..=1 {
                        let (rr, cc) = (r + dr, c + dc);
                        if rr < 0 || cc < 0 || rr >= height as isize || cc >= width as isize {
                            continue;
                        }
                        let q = rr as usize * width + cc as usize;
                        if set[q] && !seen[q] {
                            seen[q] = true;
                            stack.push(q);
                        }
                    }
                }
            }
            comps.push(comp);
        }
        comps
    }

    /// Threshold decomposition: the opening at `p` is the highest level `t`
    /// such that `p` lies in a component of `{f >= t}` with area >= lambda.
    pub fn area_opening<T: Scalar>(values: &[T], height: usize, width: usize, lambda: usize) -> Vec<T> {
        let mut levels: Vec<T> = values.to_vec();
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup();
        let min = levels[0];
        let mut out = vec![min; values.len()];
        for &t in &levels {
            let set: Vec<bool> = values.iter().map(|&v| v >= t).collect();
            for comp in label_components(&set, height, width) {
                if comp.len() >= lambda {
                    for p in comp {
                        if t > out[p] {
                            out[p] = t;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn area_closing<T: Scalar>(values: &[T], height: usize, width: usize, lambda: usize) -> Vec<T> {
        let neg: Vec<T> = values.iter().map(|&v| -v).collect();
        area_opening(&neg, height, width, lambda).into_iter().map(|v| -v).collect()
    }
}
