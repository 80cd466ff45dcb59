pub mod autodiff;
pub mod classical;
pub mod config;
pub mod envi;
pub mod fuzzify;
pub mod error;
pub mod eval;
pub mod fuzzy;
pub mod hsi;
pub mod linalg;
pub mod pipeline;
pub mod pgm;
pub mod qmcdm;
pub mod quantum;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use config::{Mode, RunConfig};
pub use fuzzy::OperatorPair;

pub type HsiF32 = hsi::Hsi<f32>;
pub type HsiF64 = hsi::Hsi<f64>;
pub type DegreeMapF32 = hsi::DegreeMap<f32>;
pub type DegreeMapF64 = hsi::DegreeMap<f64>;
