mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "hadfuzz", version, about = "Fuzzy multi-criteria hyperspectral anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector on an ENVI cube and write heatmaps, raw maps and a manifest.
    Detect(DetectArgs),
    /// Generate a synthetic scene with implanted anomalies.
    Synth(SynthArgs),
    /// Score a detection map against a reference mask.
    Eval(EvalArgs),
    /// Convert a raw single-band map to a 16-bit PGM heatmap.
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Classical,
    Quantum,
    Fused,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OpsArg {
    Einstein,
    Minmax,
}

#[derive(Args)]
pub struct DetectArgs {
    /// ENVI header of the input cube.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub output: PathBuf,
    /// `key = value` configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub ops: Option<OpsArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Add white Gaussian noise at this SNR (dB) before detection.
    #[arg(long)]
    pub snr: Option<f64>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output base path; writes `<base>.hdr`, `<base>.img` and `<base>_ref.pgm`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise level in dB; omit for the default, `none` for a clean cube.
    #[arg(long)]
    pub snr: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 30)]
    pub bands: usize,
    #[arg(long, default_value_t = 4)]
    pub endmembers: usize,
    #[arg(long, default_value_t = 5)]
    pub anomalies: usize,
    /// Pixels per anomaly (1 to 9).
    #[arg(long, default_value_t = 3)]
    pub anomaly_size: usize,
    /// Share of the anomaly spectrum in implanted pixels.
    #[arg(long, default_value_t = hadfuzz::synth::DEFAULT_ANOMALY_FRACTION)]
    pub fraction: f64,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Detection map: ENVI header of a single-band map, or a PGM.
    #[arg(long)]
    pub input: PathBuf,
    /// Reference mask PGM (nonzero = anomaly).
    #[arg(long)]
    pub reference: PathBuf,
    /// Output directory for `metrics.csv` and `roc.csv`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct ExportArgs {
    /// ENVI header of a single-band map.
    #[arg(long)]
    pub input: PathBuf,
    /// Target PGM path.
    #[arg(long)]
    pub output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect(a) => commands::detect(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Export(a) => commands::export(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
