use crate::error::{Error, Result};
use crate::hsi::DegreeMap;
use crate::scalar::Scalar;

/// Mean over the `(2r+1)^2` window clipped to the image, via an integral image.
pub fn box_mean<T: Scalar>(values: &[T], height: usize, width: usize, radius: usize) -> Vec<T> {
    let stride = width + 1;
    let mut integral = vec![T::zero(); (height + 1) * stride];
    for r in 0..height {
        let mut row_sum = T::zero();
        for c in 0..width {
            row_sum += values[r * width + c];
            integral[(r + 1) * stride + c + 1] = integral[r * stride + c + 1] + row_sum;
        }
    }
    let mut out = vec![T::zero(); values.len()];
    for r in 0..height {
        let r0 = r.saturating_sub(radius);
        let r1 = (r + radius + 1).min(height);
        for c in 0..width {
            let c0 = c.saturating_sub(radius);
            let c1 = (c + radius + 1).min(width);
            let sum = integral[r1 * stride + c1] + integral[r0 * stride + c0]
                - integral[r0 * stride + c1]
                - integral[r1 * stride + c0];
            out[r * width + c] = sum / T::of_usize((r1 - r0) * (c1 - c0));
        }
    }
    out
}

/// Edge-preserving guided filter; the output is clamped to `[0, 1]`.
pub fn guided_filter<T: Scalar>(input: &DegreeMap<T>, guide: &DegreeMap<T>, radius: usize, eps: T) -> Result<DegreeMap<T>> {
    input.ensure_same_shape(guide)?;
    if radius == 0 {
        return Err(Error::Argument("guided filter radius must be at least 1".into()));
    }
    if !(eps > T::zero()) {
        return Err(Error::Argument(format!("guided filter eps must be positive, got {eps}")));
    }
    let (h, w) = (input.height(), input.width());
    let p = input.values();
    let g = guide.values();
    let mean_g = box_mean(g, h, w, radius);
    let mean_p = box_mean(p, h, w, radius);
    let gp: Vec<T> = g.iter().zip(p).map(|(&a, &b)| a * b).collect();
    let gg: Vec<T> = g.iter().map(|&a| a * a).collect();
    let mean_gp = box_mean(&gp, h, w, radius);
    let mean_gg = box_mean(&gg, h, w, radius);
    let n = p.len();
    let mut a = vec![T::zero(); n];
    let mut b = vec![T::zero(); n];
    for i in 0..n {
        let cov = mean_gp[i] - mean_g[i] * mean_p[i];
        let var = mean_gg[i] - mean_g[i] * mean_g[i];
        a[i] = cov / (var + eps);
        b[i] = mean_p[i] - a[i] * mean_g[i];
    }
    let mean_a = box_mean(&a, h, w, radius);
    let mean_b = box_mean(&b, h, w, radius);
    let out = (0..n).map(|i| mean_a[i] * g[i] + mean_b[i]).collect();
    DegreeMap::clamped(h, w, out)
}
