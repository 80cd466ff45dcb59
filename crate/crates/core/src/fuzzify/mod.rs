//! Membership degree maps derived from the input cube: morphological,
//! geometric (unmixing + residual guidance) and statistical (Mahalanobis).

pub mod geometric;
pub mod morphology;
pub mod statistical;
pub mod subspace;
pub mod unmix;

pub use geometric::{geometrical_mf, geometrical_mf_with, guidance_map, learn_lpv, LpvWeights};
pub use morphology::{area_closing, area_opening, default_area_threshold, morphological_mf, morphological_mf_with};
pub use statistical::{mahalanobis_scores, statistical_mf, MahalanobisModel};
pub use subspace::{subspace_project, PrincipalStack};
pub use unmix::{unmix, AbundanceStack};

use crate::error::Result;
use crate::hsi::{DegreeMap, Hsi};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzifyConfig {
    pub components: usize,
    pub endmembers: usize,
    pub sigma: f64,
    /// `None` selects 0.1% of the pixel count (at least 4).
    pub area_threshold: Option<usize>,
}

impl Default for FuzzifyConfig {
    fn default() -> Self {
        Self {
            components: morphology::DEFAULT_COMPONENTS,
            endmembers: unmix::DEFAULT_ENDMEMBERS,
            sigma: geometric::DEFAULT_GUIDANCE_SIGMA,
            area_threshold: None,
        }
    }
}

/// The three membership degree maps of one cube.
#[derive(Debug, Clone)]
pub struct DegreeMaps<T = f64> {
    pub morphological: DegreeMap<T>,
    pub geometric: DegreeMap<T>,
    pub statistical: DegreeMap<T>,
}

impl<T: Scalar> DegreeMaps<T> {
    /// In the fixed order (morphological, geometric, statistical).
    pub fn as_array(&self) -> [&DegreeMap<T>; 3] {
        [&self.morphological, &self.geometric, &self.statistical]
    }
}

pub fn fuzzify<T: Scalar>(h: &Hsi<T>, cfg: &FuzzifyConfig) -> Result<DegreeMaps<T>> {
    let area = cfg.area_threshold.unwrap_or_else(|| default_area_threshold(h.pixels()));
    Ok(DegreeMaps {
        morphological: morphological_mf_with(h, cfg.components.min(h.bands()), area)?,
        geometric: geometrical_mf_with(h, cfg.endmembers, T::of(cfg.sigma))?,
        statistical: statistical_mf(h)?,
    })
}
