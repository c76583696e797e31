use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rfcomp_core::harness::{run_campaign, write_outputs, ScenarioConfig};
use rfcomp_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "rfcomp", version, about = "MIMO-OFDM IQ-imbalance and phase-noise compensation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo campaign and write results.csv plus SVG plots.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat `key = value` scenario file; flags below override it.
    #[arg(long)]
    config: PathBuf,
    /// SNR sweep in dB, `a:b:step` or a comma list.
    #[arg(long)]
    snr: Option<String>,
    /// Phase-noise 3 dB linewidths in Hz, comma separated (`5k` allowed).
    #[arg(long)]
    beta: Option<String>,
    /// Antenna configuration, e.g. `2x2` or `4x4`.
    #[arg(long)]
    mimo: Option<String>,
    /// IQ imbalance, e.g. `5deg,10pct`.
    #[arg(long)]
    iq: Option<String>,
    /// full, iq-only, pn-only, uncompensated or genie (comma list allowed).
    #[arg(long)]
    mode: Option<String>,
    /// zf or mmse.
    #[arg(long)]
    detector: Option<String>,
    /// Channel completion: interp or iterative.
    #[arg(long)]
    ce: Option<String>,
    #[arg(long)]
    frames: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn configure(args: &SimulateArgs) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::from_file(&args.config)?;
    let overrides = [
        ("snr", &args.snr),
        ("beta", &args.beta),
        ("mimo", &args.mimo),
        ("iq", &args.iq),
        ("mode", &args.mode),
        ("detector", &args.detector),
        ("ce", &args.ce),
        ("frames", &args.frames),
        ("seed", &args.seed),
        ("workers", &args.workers),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v).map_err(|e| Error::Config(format!("--{key}: {e}")))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(args: &SimulateArgs) -> ExitCode {
    let cfg = match configure(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("rfcomp: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    log::info!(
        "{}x{}, {} SNR points x {} linewidths x {} modes, {} frames each",
        cfg.frame.m_t,
        cfg.frame.m_r,
        cfg.snr_db.len(),
        cfg.beta_hz.len(),
        cfg.modes.len(),
        cfg.frames
    );
    let start = Instant::now();
    let result = match run_campaign(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("rfcomp: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    if let Err(e) = write_outputs(&result, &args.out) {
        eprintln!("rfcomp: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    let failed: u64 = result.rows.iter().map(|r| r.failed_frames).sum();
    if failed > 0 {
        log::warn!("{failed} frame runs failed and were scored as all-error");
    }
    log::info!("wrote {} rows to {} in {:.1?}", result.rows.len(), args.out.display(), start.elapsed());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(args) => simulate(args),
    }
}
