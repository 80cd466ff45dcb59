//! The full detection pipeline with per-stage timing.

use std::time::Instant;

use crate::classical::{classical_from_maps, ClassicalReport};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::fuzzify::{fuzzify, DegreeMaps};
use crate::hsi::{DegreeMap, Hsi};
use crate::qmcdm::{band_energy, fuse_detections, train, TrainOutput};
use crate::synth::add_noise;

/// Outputs of one run. Maps not requested by the mode are `None`.
#[derive(Debug, Clone)]
pub struct Detection {
    pub maps: DegreeMaps<f64>,
    pub classical: ClassicalReport<f64>,
    pub quantum: Option<TrainOutput>,
    pub fused: Option<DegreeMap<f64>>,
    /// Mean post-gate activation per band of the trained band selector.
    pub band_energy: Option<Vec<f64>>,
    /// `(stage, seconds)` in execution order.
    pub timings: Vec<(&'static str, f64)>,
}

impl Detection {
    pub fn d_c(&self) -> &DegreeMap<f64> {
        &self.classical.detection
    }

    pub fn d_q(&self) -> Option<&DegreeMap<f64>> {
        self.quantum.as_ref().map(|q| &q.detection)
    }

    pub fn alpha(&self) -> f64 {
        self.classical.ec.factor.alpha
    }
}

fn stage<V>(name: &'static str, timings: &mut Vec<(&'static str, f64)>, f: impl FnOnce() -> Result<V>) -> Result<V> {
    let start = Instant::now();
    let out = f().map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })?;
    timings.push((name, start.elapsed().as_secs_f64()));
    Ok(out)
}

/// Runs noise injection (if configured), fuzzification, the classical
/// detector and, unless the mode is classical, training and fusion.
pub fn run(h: &Hsi<f64>, cfg: &RunConfig) -> Result<Detection> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let noisy;
    let cube = match cfg.snr_db {
        Some(snr) => {
            noisy = stage("noise", &mut timings, || add_noise(h, snr, cfg.seed()))?;
            &noisy
        }
        None => h,
    };
    let maps = stage("fuzzify", &mut timings, || fuzzify(cube, &cfg.classical.fuzzify))?;
    let classical = stage("classical", &mut timings, || classical_from_maps(&maps, &cfg.classical))?;
    let (mut quantum, mut fused, mut energy) = (None, None, None);
    if cfg.mode.needs_training() {
        let out = stage("train", &mut timings, || train(cube, &maps, &classical.detection, &cfg.train))?;
        energy = Some(band_energy(cube, &out.params)?);
        if cfg.mode == Mode::Fused {
            fused = Some(stage("fuse", &mut timings, || fuse_detections(&classical.detection, &out.detection))?);
        }
        quantum = Some(out);
    }
    Ok(Detection {
        maps,
        classical,
        quantum,
        fused,
        band_energy: energy,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_scene, Scene, SceneSpec};

    fn scene() -> Scene {
        gen_scene(&SceneSpec {
            height: 16,
            width: 16,
            bands: 8,
            n_endmembers: 3,
            n_anomalies: 2,
            anomaly_size: 2,
            seed: 4,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn classical_mode_skips_training() {
        let cfg = RunConfig {
            mode: Mode::Classical,
            ..Default::default()
        };
        let d = run(&scene().cube, &cfg).unwrap();
        assert!(d.quantum.is_none() && d.fused.is_none() && d.band_energy.is_none());
        let stages: Vec<_> = d.timings.iter().map(|t| t.0).collect();
        assert_eq!(stages, ["fuzzify", "classical"]);
    }

    #[test]
    fn fused_mode_multiplies_maps() {
        let mut cfg = RunConfig::default();
        cfg.train.epochs = 2;
        cfg.snr_db = Some(20.0);
        let d = run(&scene().cube, &cfg).unwrap();
        let dq = d.d_q().unwrap();
        let fused = d.fused.as_ref().unwrap();
        for ((&c, &q), &f) in d.d_c().values().iter().zip(dq.values()).zip(fused.values()) {
            assert_eq!(f, c * q);
        }
        assert_eq!(d.band_energy.as_ref().unwrap().len(), 8);
        let stages: Vec<_> = d.timings.iter().map(|t| t.0).collect();
        assert_eq!(stages, ["noise", "fuzzify", "classical", "train", "fuse"]);
    }

    #[test]
    fn f32_classical_path_tracks_f64() {
        let s = scene();
        let cfg = RunConfig::default();
        let maps64 = fuzzify(&s.cube, &cfg.classical.fuzzify).unwrap();
        let maps32 = fuzzify(&s.cube.cast::<f32>(), &cfg.classical.fuzzify).unwrap();
        for (a, b) in [
            (&maps64.morphological, &maps32.morphological),
            (&maps64.geometric, &maps32.geometric),
            (&maps64.statistical, &maps32.statistical),
        ] {
            let gap = a.values().iter().zip(b.values()).map(|(x, &y)| (x - f64::from(y)).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-4, "fuzzified maps differ by {gap}");
        }
        let d64 = classical_from_maps(&maps64, &cfg.classical).unwrap().detection;
        let d32 = classical_from_maps(&maps32, &cfg.classical).unwrap().detection;
        let auc64 = crate::eval::roc_auc(&d64, &s.reference).unwrap().auc;
        let auc32 = crate::eval::roc_auc(&d32, &s.reference).unwrap().auc;
        assert!((auc64 - auc32).abs() < 1e-3, "AUC {auc64} vs {auc32}");
    }

    #[test]
    fn stage_errors_are_tagged() {
        let flat = Hsi::from_fn(8, 8, 4, |_, _, b| 0.2 + 0.1 * b as f64).unwrap();
        let cfg = RunConfig::default();
        match run(&flat, &cfg) {
            Err(Error::Stage { stage, .. }) => assert!(["fuzzify", "classical", "train"].contains(&stage)),
            other => panic!("expected a stage error, got {other:?}"),
        }
    }
}
