//! Cube and map containers plus the elementary conditioning shared by every
//! downstream stage.

use rayon::prelude::*;

use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

/// Hyperspectral cube stored row-major as `(row, col, band)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hsi<T = f64> {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<T>,
    wavelengths: Option<Vec<f64>>,
}

impl<T: Scalar> Hsi<T> {
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::Argument(format!(
                "cube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        if data.len() != height * width * bands {
            return Err(shape_err(
                format!("{} values ({height}x{width}x{bands})", height * width * bands),
                format!("{} values", data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite cube value at flat index {i}")));
        }
        Ok(Self {
            height,
            width,
            bands,
            data,
            wavelengths: None,
        })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * bands);
        for r in 0..height {
            for c in 0..width {
                for b in 0..bands {
                    data.push(f(r, c, b));
                }
            }
        }
        Self::new(height, width, bands, data)
    }

    pub fn with_wavelengths(mut self, wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != self.bands {
            return Err(shape_err(
                format!("{} wavelengths", self.bands),
                format!("{}", wavelengths.len()),
            ));
        }
        self.wavelengths = Some(wavelengths);
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn wavelengths(&self) -> Option<&[f64]> {
        self.wavelengths.as_deref()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> T {
        self.data[(row * self.width + col) * self.bands + band]
    }

    /// Spectrum of the pixel with flat index `p`.
    #[inline]
    pub fn pixel(&self, p: usize) -> &[T] {
        &self.data[p * self.bands..(p + 1) * self.bands]
    }

    /// Copies band `b` into a row-major plane.
    pub fn band_plane(&self, b: usize) -> Vec<T> {
        (0..self.pixels()).map(|p| self.data[p * self.bands + b]).collect()
    }

    /// Reassembles a cube from per-band row-major planes.
    pub fn from_band_planes(height: usize, width: usize, planes: &[Vec<T>]) -> Result<Self> {
        let bands = planes.len();
        let n = height * width;
        if let Some(bad) = planes.iter().find(|p| p.len() != n) {
            return Err(shape_err(format!("{n} values per band"), bad.len()));
        }
        let mut data = vec![T::zero(); n * bands];
        for (b, plane) in planes.iter().enumerate() {
            for (p, &v) in plane.iter().enumerate() {
                data[p * bands + b] = v;
            }
        }
        Self::new(height, width, bands, data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        let mut out = Self::new(
            self.height,
            self.width,
            self.bands,
            self.data.iter().map(|&v| f(v)).collect(),
        )?;
        out.wavelengths = self.wavelengths.clone();
        Ok(out)
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Hsi<U> {
        Hsi {
            height: self.height,
            width: self.width,
            bands: self.bands,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
            wavelengths: self.wavelengths.clone(),
        }
    }
}

/// Nonnegative, unbounded per-pixel scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap<T = f64> {
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Scalar> ScoreMap<T> {
    pub fn new(height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        check_len(height, width, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::Argument(format!(
                "score at index {i} must be finite and nonnegative, got {}",
                values[i]
            )));
        }
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Per-pixel fuzzy degrees in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeMap<T = f64> {
    height: usize,
    width: usize,
    values: Vec<T>,
}

/// Slack admitted (and clamped away) when validating degrees.
pub fn degree_tolerance<T: Scalar>() -> T {
    // f32 cannot resolve 1e-9 around 1.0, so widen to a few ulps there.
    T::of(1e-9).max(T::epsilon() * T::of(8.0))
}

/// Validates a degree, clamping values within tolerance of the unit interval.
pub fn checked_degree<T: Scalar>(v: T) -> Result<T> {
    let tol = degree_tolerance::<T>();
    if v.is_nan() || v < -tol || v > T::one() + tol {
        return Err(Error::Argument(format!("degree {v} outside [0, 1]")));
    }
    Ok(v.max(T::zero()).min(T::one()))
}

impl<T: Scalar> DegreeMap<T> {
    pub fn new(height: usize, width: usize, mut values: Vec<T>) -> Result<Self> {
        check_len(height, width, values.len())?;
        for v in values.iter_mut() {
            *v = checked_degree(*v)?;
        }
        Ok(Self { height, width, values })
    }

    pub fn filled(height: usize, width: usize, value: T) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![T::zero(); height * width],
        }
    }

    /// Builds a map from raw values, clamping into `[0, 1]` without validation.
    pub fn clamped(height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        check_len(height, width, values.len())?;
        let values = values
            .into_iter()
            .map(|v| if v.is_nan() { T::zero() } else { v.max(T::zero()).min(T::one()) })
            .collect();
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.width + col]
    }

    pub fn same_shape<U>(&self, other: &DegreeMap<U>) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn ensure_same_shape<U>(&self, other: &DegreeMap<U>) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(shape_err(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ))
        }
    }

    /// Elementwise combination of two same-shaped maps.
    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.ensure_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.height, self.width, values)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.height, self.width, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Sum of squared degrees.
    pub fn energy(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }

    pub fn cast<U: Scalar>(&self) -> DegreeMap<U> {
        DegreeMap {
            height: self.height,
            width: self.width,
            values: self
                .values
                .iter()
                .map(|v| U::of(v.as_f64()).max(U::zero()).min(U::one()))
                .collect(),
        }
    }
}

/// Binary per-pixel map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    values: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, values: Vec<bool>) -> Result<Self> {
        check_len(height, width, values.len())?;
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![false; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [bool] {
        &mut self.values
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    /// Flat indices of the set positions.
    pub fn ones(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| v.then_some(i))
            .collect()
    }

    pub fn to_degrees<T: Scalar>(&self) -> DegreeMap<T> {
        DegreeMap {
            height: self.height,
            width: self.width,
            values: self
                .values
                .iter()
                .map(|&v| if v { T::one() } else { T::zero() })
                .collect(),
        }
    }
}

fn check_len(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::Argument(format!(
            "map dimensions must be positive, got {height}x{width}"
        )));
    }
    if len != height * width {
        return Err(shape_err(format!("{} values ({height}x{width})", height * width), len));
    }
    Ok(())
}

/// Rescales scores to `[0, 1]`; a constant map becomes all zeros.
pub fn minmax_normalize<T: Scalar>(s: &ScoreMap<T>) -> DegreeMap<T> {
    DegreeMap {
        height: s.height,
        width: s.width,
        values: minmax_values(&s.values),
    }
}

/// Min-max rescaling of an arbitrary finite slice.
pub(crate) fn minmax_values<T: Scalar>(values: &[T]) -> Vec<T> {
    let (lo, hi) = values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > T::zero()) {
        return vec![T::zero(); values.len()];
    }
    values
        .iter()
        .map(|&v| ((v - lo) / range).max(T::zero()).min(T::one()))
        .collect()
}

/// Normalized, truncated (radius `ceil(3 sigma)`) 1-D Gaussian kernel.
pub fn gaussian_kernel<T: Scalar>(sigma: T) -> Result<Vec<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::Argument(format!("sigma must be positive, got {sigma}")));
    }
    let radius = (sigma * T::of(3.0)).ceil().to_usize().unwrap_or(0);
    let denom = T::of(2.0) * sigma * sigma;
    let mut k: Vec<T> = (0..=2 * radius)
        .map(|i| {
            let x = T::of_usize(i) - T::of_usize(radius);
            (-(x * x) / denom).exp()
        })
        .collect();
    let total: T = k.iter().copied().sum();
    for w in k.iter_mut() {
        *w /= total;
    }
    Ok(k)
}

/// Separable Gaussian convolution of one row-major plane with edge replication.
pub(crate) fn blur_plane<T: Scalar>(plane: &[T], height: usize, width: usize, kernel: &[T]) -> Vec<T> {
    let radius = (kernel.len() / 2) as isize;
    let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![T::zero(); plane.len()];
    for r in 0..height {
        let row = &plane[r * width..(r + 1) * width];
        for c in 0..width {
            let mut acc = T::zero();
            for (k, &w) in kernel.iter().enumerate() {
                let cc = clampi(c as isize + k as isize - radius, width);
                acc += w * row[cc];
            }
            tmp[r * width + c] = acc;
        }
    }
    let mut out = vec![T::zero(); plane.len()];
    for r in 0..height {
        for c in 0..width {
            let mut acc = T::zero();
            for (k, &w) in kernel.iter().enumerate() {
                let rr = clampi(r as isize + k as isize - radius, height);
                acc += w * tmp[rr * width + c];
            }
            out[r * width + c] = acc;
        }
    }
    out
}

/// Per-band 2-D Gaussian blur with replicate padding.
pub fn gaussian_blur<T: Scalar>(h: &Hsi<T>, sigma: T) -> Result<Hsi<T>> {
    let kernel = gaussian_kernel(sigma)?;
    let planes: Vec<Vec<T>> = (0..h.bands())
        .into_par_iter()
        .map(|b| blur_plane(&h.band_plane(b), h.height(), h.width(), &kernel))
        .collect();
    let mut out = Hsi::from_band_planes(h.height(), h.width(), &planes)?;
    out.wavelengths = h.wavelengths.clone();
    Ok(out)
}
