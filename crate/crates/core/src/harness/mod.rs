//! Seeded Monte-Carlo campaigns over SNR, phase-noise linewidth and
//! compensation mode, with CSV and SVG output.
//!
//! Every frame draws its channel, payload, noise and phase-noise path from a
//! generator keyed only by the master seed and the frame index, so all sweep
//! points and modes see the same underlying realizations and results do not
//! depend on scheduling.

mod config;
mod metrics;
mod report;
mod sim;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RandomSource;

pub use config::{parse_iq, parse_snr, CeMethod, Mode, PreambleMethod, ScenarioConfig};
pub use metrics::{compute_mse_ce, compute_mse_k1};
pub use report::{emit_csv, emit_plot, write_outputs, PlotMetric, CSV_HEADER};
pub use sim::{frame_source, FrameOutcome, Link, PreambleStage, ReceivedFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub m_t: usize,
    pub m_r: usize,
    pub snr_db: f64,
    pub beta_hz: f64,
    pub mode: Mode,
    pub frames: usize,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// Mean over frames that completed; NaN when none did.
    pub mse_ce: f64,
    pub mse_k1: f64,
    pub flagged_symbols: u64,
    pub failed_frames: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: ScenarioConfig,
    pub rows: Vec<ResultRow>,
}

impl CampaignResult {
    pub fn row(&self, mode: Mode, snr_db: f64, beta_hz: f64) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.mode == mode && r.snr_db == snr_db && r.beta_hz == beta_hz)
    }
}

/// Folds per-frame outcomes (`outcomes[frame][mode]`) into one row per mode.
fn aggregate(link: &Link, snr_db: f64, beta_hz: f64, outcomes: &[Vec<Result<FrameOutcome>>]) -> Vec<ResultRow> {
    let cfg = &link.cfg;
    let frame_bits = cfg.frame.payload_bits(&link.map) as u64;
    cfg.modes
        .iter()
        .enumerate()
        .map(|(i, &mode)| {
            let mut row = ResultRow {
                m_t: cfg.frame.m_t,
                m_r: cfg.frame.m_r,
                snr_db,
                beta_hz,
                mode,
                frames: outcomes.len(),
                bits: 0,
                bit_errors: 0,
                ber: 0.0,
                mse_ce: 0.0,
                mse_k1: 0.0,
                flagged_symbols: 0,
                failed_frames: 0,
                seed: cfg.master_seed,
            };
            let mut ok = 0usize;
            for per_mode in outcomes {
                match &per_mode[i] {
                    Ok(o) => {
                        row.bits += o.bits;
                        row.bit_errors += o.bit_errors;
                        row.mse_ce += o.mse_ce;
                        row.mse_k1 += o.mse_k1;
                        row.flagged_symbols += o.flagged_symbols;
                        ok += 1;
                    }
                    Err(e) => {
                        log::warn!("{mode} frame failed at {snr_db} dB, beta {beta_hz}: {e}");
                        // a lost frame loses every bit it carried
                        row.bits += frame_bits;
                        row.bit_errors += frame_bits;
                        row.failed_frames += 1;
                    }
                }
            }
            row.ber = if row.bits == 0 { 0.0 } else { row.bit_errors as f64 / row.bits as f64 };
            row.mse_ce = if ok == 0 { f64::NAN } else { row.mse_ce / ok as f64 };
            row.mse_k1 = if ok == 0 { f64::NAN } else { row.mse_k1 / ok as f64 };
            row
        })
        .collect()
}

/// All configured modes at one `(snr, beta)` point, frames run in order.
pub fn run_point(cfg: &ScenarioConfig, snr_db: f64, beta_hz: f64, root: &RandomSource) -> Result<Vec<ResultRow>> {
    let link = Link::new(cfg)?;
    let outcomes: Vec<_> = (0..cfg.frames as i64).map(|f| link.run_frame(snr_db, beta_hz, root, f)).collect();
    Ok(aggregate(&link, snr_db, beta_hz, &outcomes))
}

/// Full sweep, rows ordered by beta, then SNR, then mode.
pub fn run_campaign(cfg: &ScenarioConfig) -> Result<CampaignResult> {
    let link = Link::new(cfg)?;
    let root = RandomSource::new(cfg.master_seed);
    let points: Vec<(f64, f64)> = cfg.beta_hz.iter().flat_map(|&b| cfg.snr_db.iter().map(move |&s| (s, b))).collect();
    let tasks: Vec<(usize, i64)> = (0..points.len()).flat_map(|p| (0..cfg.frames as i64).map(move |f| (p, f))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<Vec<Result<FrameOutcome>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, f)| link.run_frame(points[p].0, points[p].1, &root, f))
            .collect()
    });
    let rows = outcomes
        .chunks(cfg.frames)
        .zip(&points)
        .flat_map(|(chunk, &(snr, beta))| aggregate(&link, snr, beta, chunk))
        .collect();
    Ok(CampaignResult { config: cfg.clone(), rows })
}
