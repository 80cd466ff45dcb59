use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use hadfuzz::envi::{load_envi, load_map, save_map};
use hadfuzz::eval::{metrics_csv, roc_auc, roc_csv};
use hadfuzz::hsi::DegreeMap;
use hadfuzz::pgm::{read_mask_pgm, read_pgm_degrees, write_pgm16};
use hadfuzz::qmcdm::fuse_detections;
use hadfuzz::synth::{gen_scene, write_scene, Scene, SceneSpec};
use hadfuzz::{pipeline, Mode, OperatorPair, RunConfig};

use crate::{DetectArgs, EvalArgs, ExportArgs, ModeArg, OpsArg, SynthArgs};

const MANIFEST_VERSION: u32 = 1;
const FMAX_NAMES: [&str; 3] = ["morphological", "geometric", "statistical"];

fn resolve_config(a: &DetectArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("config: loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Classical => Mode::Classical,
            ModeArg::Quantum => Mode::Quantum,
            ModeArg::Fused => Mode::Fused,
        };
    }
    if let Some(o) = a.ops {
        cfg.classical.ops = match o {
            OpsArg::Einstein => OperatorPair::Einstein,
            OpsArg::Minmax => OperatorPair::MinMax,
        };
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(s) = a.snr {
        cfg.snr_db = Some(s);
    }
    cfg.validate().context("config")?;
    Ok(cfg)
}

/// Writes `<dir>/<name>.pgm`, `.hdr` and `.img`; the raw maps are 32-bit.
fn write_map(dir: &Path, name: &str, map: &DegreeMap<f32>) -> Result<()> {
    write_pgm16(map, dir.join(format!("{name}.pgm")))?;
    save_map(map, dir.join(name))?;
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

pub fn detect(a: &DetectArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = resolve_config(a)?;
    let cube = load_envi::<f64>(&a.input).with_context(|| format!("read stage: loading {}", a.input.display()))?;
    let run = pipeline::run(&cube, &cfg)?;
    fs::create_dir_all(&a.output).with_context(|| format!("write stage: creating {}", a.output.display()))?;

    let d_c = run.d_c().cast::<f32>();
    let d_q = run.d_q().map(DegreeMap::cast::<f32>);
    let write = || -> Result<()> {
        if cfg.mode != Mode::Quantum {
            write_map(&a.output, "d_c", &d_c)?;
        }
        if let Some(q) = &d_q {
            write_map(&a.output, "d_q", q)?;
            if cfg.mode == Mode::Fused {
                // fused from the stored 32-bit maps so the raw files satisfy D = D_C * D_Q exactly
                write_map(&a.output, "d", &fuse_detections(&d_c, q)?)?;
            }
        }
        Ok(())
    };
    write().context("write stage")?;

    let mut m = String::new();
    let _ = writeln!(m, "version.hadfuzz = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "version.manifest = {MANIFEST_VERSION}");
    let _ = writeln!(m, "run.command = detect");
    let _ = writeln!(m, "run.input = {}", a.input.display());
    let _ = writeln!(m, "run.dims = {}x{}x{}", cube.height(), cube.width(), cube.bands());
    m.push_str(&cfg.render("config."));
    let _ = writeln!(m, "result.alpha = {:?}", run.alpha());
    let _ = writeln!(m, "result.ec_iterations = {}", run.classical.ec.iterations);
    let _ = writeln!(m, "result.fmax_map = {}", FMAX_NAMES[run.classical.fmax_index]);
    if let Some(e) = &run.band_energy {
        let _ = writeln!(m, "result.band_energy = {}", join(e));
        let zero = e.iter().filter(|&&v| v == 0.0).count();
        let _ = writeln!(m, "result.null_energy_bands = {zero}");
    }
    if let Some(q) = &run.quantum {
        let (first, last) = (q.loss_trace[0], q.loss_trace[q.loss_trace.len() - 1]);
        let _ = writeln!(m, "result.loss_initial = {first:?}");
        let _ = writeln!(m, "result.loss_final = {last:?}");
    }
    for (stage, secs) in &run.timings {
        let _ = writeln!(m, "timing.{stage} = {secs:.6}");
    }
    let _ = writeln!(m, "timing.total = {:.6}", start.elapsed().as_secs_f64());
    let path = a.output.join("manifest.txt");
    fs::write(&path, m).with_context(|| format!("write stage: {}", path.display()))?;
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let snr_db = match a.snr.as_deref() {
        None => SceneSpec::default().snr_db,
        Some(s) if s.eq_ignore_ascii_case("none") => None,
        Some(s) => Some(s.parse::<f64>().with_context(|| format!("synth: --snr expects dB or 'none', got '{s}'"))?),
    };
    let spec = SceneSpec {
        height: a.height,
        width: a.width,
        bands: a.bands,
        n_endmembers: a.endmembers,
        n_anomalies: a.anomalies,
        anomaly_size: a.anomaly_size,
        anomaly_fraction: a.fraction,
        snr_db,
        seed: a.seed,
    };
    let scene: Scene<f64> = gen_scene(&spec).context("synth stage")?;
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("write stage: creating {}", dir.display()))?;
    }
    write_scene(&scene, &a.output).context("write stage")?;
    Ok(())
}

fn is_pgm(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn load_scores(p: &PathBuf) -> Result<DegreeMap<f64>> {
    let map = if is_pgm(p) { read_pgm_degrees(p) } else { load_map(p) };
    map.with_context(|| format!("read stage: loading {}", p.display()))
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let scores = load_scores(&a.input)?;
    if !is_pgm(&a.reference) {
        bail!("read stage: reference must be a PGM mask, got {}", a.reference.display());
    }
    let reference = read_mask_pgm(&a.reference).with_context(|| format!("read stage: loading {}", a.reference.display()))?;
    let roc = roc_auc(&scores, &reference).context("eval stage")?;
    fs::create_dir_all(&a.output).with_context(|| format!("write stage: creating {}", a.output.display()))?;
    let metrics = metrics_csv(&[("auc", roc.auc)])?;
    fs::write(a.output.join("metrics.csv"), metrics).context("write stage")?;
    fs::write(a.output.join("roc.csv"), roc_csv(&roc)?).context("write stage")?;
    println!("auc = {:.6}", roc.auc);
    Ok(())
}

pub fn export(a: &ExportArgs) -> Result<()> {
    let map = load_scores(&a.input)?;
    write_pgm16(&map, &a.output).with_context(|| format!("write stage: {}", a.output.display()))?;
    Ok(())
}
