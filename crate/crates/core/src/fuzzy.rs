//! Scalar fuzzy operators and their elementwise lifting onto degree maps.
//!
//! The Einstein product and sum form a dual pair under the standard
//! complement `1 - x`. The min/max pair is kept for ablation runs.

use crate::error::Result;
use crate::hsi::{checked_degree, DegreeMap};
use crate::scalar::Scalar;

/// A fuzzy degree in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Degree<T = f64>(T);

impl<T: Scalar> Degree<T> {
    pub fn new(value: T) -> Result<Self> {
        checked_degree(value).map(Self)
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// Which conjunction/disjunction pair the rule engine uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorPair {
    #[default]
    Einstein,
    MinMax,
}

impl OperatorPair {
    pub fn t_norm<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            OperatorPair::Einstein => einstein_product_raw(x, y),
            OperatorPair::MinMax => x.min(y),
        }
    }

    pub fn t_conorm<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            OperatorPair::Einstein => einstein_sum_raw(x, y),
            OperatorPair::MinMax => x.max(y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorPair::Einstein => "einstein",
            OperatorPair::MinMax => "minmax",
        }
    }
}

impl std::str::FromStr for OperatorPair {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "einstein" => Ok(Self::Einstein),
            "minmax" | "min-max" => Ok(Self::MinMax),
            other => Err(crate::error::Error::Argument(format!(
                "unknown operator pair '{other}' (expected einstein or minmax)"
            ))),
        }
    }
}

#[inline]
pub(crate) fn einstein_product_raw<T: Scalar>(x: T, y: T) -> T {
    let num = x * y;
    if num == T::zero() {
        return T::zero();
    }
    num / (T::of(2.0) - (x + y - num))
}

#[inline]
pub(crate) fn einstein_sum_raw<T: Scalar>(x: T, y: T) -> T {
    (x + y) / (T::one() + x * y)
}

/// `xy / (2 - (x + y - xy))`
pub fn einstein_product<T: Scalar>(x: T, y: T) -> Result<T> {
    Ok(einstein_product_raw(checked_degree(x)?, checked_degree(y)?))
}

/// `(x + y) / (1 + xy)`
pub fn einstein_sum<T: Scalar>(x: T, y: T) -> Result<T> {
    Ok(einstein_sum_raw(checked_degree(x)?, checked_degree(y)?))
}

pub fn complement<T: Scalar>(x: T) -> Result<T> {
    Ok(T::one() - checked_degree(x)?)
}

pub fn min_t<T: Scalar>(x: T, y: T) -> Result<T> {
    Ok(checked_degree(x)?.min(checked_degree(y)?))
}

pub fn max_s<T: Scalar>(x: T, y: T) -> Result<T> {
    Ok(checked_degree(x)?.max(checked_degree(y)?))
}

/// Elementwise t-norm of two degree maps.
pub fn conjunction<T: Scalar>(ops: OperatorPair, a: &DegreeMap<T>, b: &DegreeMap<T>) -> Result<DegreeMap<T>> {
    a.zip_with(b, |x, y| ops.t_norm(x, y))
}

/// Elementwise t-conorm of two degree maps.
pub fn disjunction<T: Scalar>(ops: OperatorPair, a: &DegreeMap<T>, b: &DegreeMap<T>) -> Result<DegreeMap<T>> {
    a.zip_with(b, |x, y| ops.t_conorm(x, y))
}

pub fn complement_map<T: Scalar>(a: &DegreeMap<T>) -> DegreeMap<T> {
    a.map(|x| T::one() - x).expect("complement of a degree map stays in range")
}
