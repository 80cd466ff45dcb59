//! Runs the classical, quantum and fused detectors over seeded synthetic
//! scenes and prints per-seed AUCs.
//!
//! `cargo run --release --example synthetic_suite -- [seeds] [steps_per_epoch] [snr_db] [anomaly_fraction]`

use std::time::Instant;

use hadfuzz::classical::{classical_from_maps, ClassicalConfig};
use hadfuzz::eval::roc_auc;
use hadfuzz::fuzzify::fuzzify;
use hadfuzz::fuzzy::OperatorPair;
use hadfuzz::qmcdm::{fuse_detections, train, TrainConfig};
use hadfuzz::synth::{gen_scene, Scene, SceneSpec};

fn main() -> hadfuzz::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seeds: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(5);
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(hadfuzz::qmcdm::DEFAULT_STEPS_PER_EPOCH);
    let snr: Option<f64> = args.get(2).and_then(|s| s.parse().ok()).or(Some(30.0));
    let fraction: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(hadfuzz::synth::DEFAULT_ANOMALY_FRACTION);
    let mut sums = [0.0; 4];
    for seed in 0..seeds {
        let t0 = Instant::now();
        let scene: Scene = gen_scene(&SceneSpec { seed, snr_db: snr, anomaly_fraction: fraction, ..Default::default() })?;
        let cfg = ClassicalConfig::default();
        let maps = fuzzify(&scene.cube, &cfg.fuzzify)?;
        let classical = classical_from_maps(&maps, &cfg)?;
        let minmax = classical_from_maps(&maps, &ClassicalConfig { ops: OperatorPair::MinMax, ..cfg.clone() })?;
        let minmax_auc = roc_auc(&minmax.detection, &scene.reference)?.auc;
        sums[3] += minmax_auc;
        let tc = TrainConfig { seed, steps_per_epoch: steps, ..Default::default() };
        let out = train(&scene.cube, &maps, &classical.detection, &tc)?;
        let fused = fuse_detections(&classical.detection, &out.detection)?;
        let aucs = [
            roc_auc(&classical.detection, &scene.reference)?.auc,
            roc_auc(&out.detection, &scene.reference)?.auc,
            roc_auc(&fused, &scene.reference)?.auc,
        ];
        let fm = [&maps.morphological, &maps.geometric, &maps.statistical]
            .map(|m| roc_auc(m, &scene.reference).map(|r| r.auc).unwrap_or(f64::NAN));
        for k in 0..3 {
            sums[k] += aucs[k];
        }
        println!(
            "seed {seed:2}: minmax {minmax_auc:.4} classical {:.4} quantum {:.4} fused {:.4} | M {:.3} G {:.3} S {:.3} | loss {:.4} -> {:.4} | {:.1}s",
            aucs[0],
            aucs[1],
            aucs[2],
            fm[0],
            fm[1],
            fm[2],
            out.loss_trace[0],
            out.loss_trace.last().copied().unwrap_or(f64::NAN),
            t0.elapsed().as_secs_f64()
        );
    }
    let n = seeds as f64;
    println!(
        "mean: minmax {:.4} classical {:.4} quantum {:.4} fused {:.4}",
        sums[3] / n,
        sums[0] / n,
        sums[1] / n,
        sums[2] / n
    );
    Ok(())
}
