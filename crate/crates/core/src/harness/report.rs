use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CampaignResult, Mode, ResultRow};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 16] = [
    "m_t",
    "m_r",
    "snr_db",
    "beta_hz",
    "mode",
    "detector",
    "ce_method",
    "frames",
    "seed",
    "bits",
    "bit_errors",
    "ber",
    "mse_ce",
    "mse_k1",
    "flagged_symbols",
    "failed_frames",
];

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

/// Writes the result table. Byte-identical for identical results.
pub fn emit_csv(result: &CampaignResult, path: &Path) -> Result<()> {
    let cfg = &result.config;
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e.into()))?;
    let detector = format!("{:?}", cfg.detector).to_lowercase();
    let mut write = |rec: Vec<String>| w.write_record(&rec).map_err(|e| io_err(path, e.into()));
    write(CSV_HEADER.iter().map(|s| s.to_string()).collect())?;
    for r in &result.rows {
        write(vec![
            r.m_t.to_string(),
            r.m_r.to_string(),
            format!("{}", r.snr_db),
            format!("{}", r.beta_hz),
            r.mode.name().to_string(),
            detector.clone(),
            cfg.ce_method.name().to_string(),
            r.frames.to_string(),
            r.seed.to_string(),
            r.bits.to_string(),
            r.bit_errors.to_string(),
            sci(r.ber),
            sci(r.mse_ce),
            sci(r.mse_k1),
            r.flagged_symbols.to_string(),
            r.failed_frames.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMetric {
    Ber,
    MseCe,
    MseK1,
}

impl PlotMetric {
    fn value(self, r: &ResultRow) -> f64 {
        match self {
            PlotMetric::Ber => r.ber,
            PlotMetric::MseCe => r.mse_ce,
            PlotMetric::MseK1 => r.mse_k1,
        }
    }

    fn label(self) -> &'static str {
        match self {
            PlotMetric::Ber => "BER",
            PlotMetric::MseCe => "channel estimation MSE",
            PlotMetric::MseK1 => "K1 estimation MSE",
        }
    }
}

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const DASHES: [&str; 4] = ["", "6,3", "2,3", "8,3,2,3"];

/// Log-scale line chart of `metric` against SNR, one polyline per
/// `(mode, beta)` series. Zeros sit on the bottom axis.
pub fn emit_plot(result: &CampaignResult, metric: PlotMetric, path: &Path) -> Result<()> {
    fs::write(path, render_svg(result, metric)).map_err(|e| io_err(path, e))
}

fn render_svg(result: &CampaignResult, metric: PlotMetric) -> String {
    let (w, h, left, right, top, bottom) = (720.0, 480.0, 70.0, 190.0, 30.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let mut series: BTreeMap<(usize, u64), Vec<(f64, f64)>> = BTreeMap::new();
    let mode_rank = |m: Mode| Mode::ALL.iter().position(|&x| x == m).unwrap_or(0);
    for r in &result.rows {
        series.entry((mode_rank(r.mode), r.beta_hz.to_bits())).or_default().push((r.snr_db, metric.value(r)));
    }
    let snrs: Vec<f64> = result.rows.iter().map(|r| r.snr_db).collect();
    let (x0, mut x1) = (snrs.iter().cloned().fold(f64::INFINITY, f64::min), snrs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let positive: Vec<f64> = result.rows.iter().map(|r| metric.value(r)).filter(|v| *v > 0.0 && v.is_finite()).collect();
    let hi = positive.iter().cloned().fold(1e-6, f64::max);
    let lo = positive.iter().cloned().fold(hi, f64::min);
    let (d0, mut d1) = ((lo.log10().floor() - 1.0).min(hi.log10().ceil() - 1.0), hi.log10().ceil());
    if d1 <= d0 {
        d1 = d0 + 1.0;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |v: f64| {
        let d = if v > 0.0 && v.is_finite() { v.log10().clamp(d0, d1) } else { d0 };
        top + (d1 - d) / (d1 - d0) * ph
    };
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    for d in (d0 as i32)..=(d1 as i32) {
        let y = py(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, left + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, left - 6.0, y + 4.0);
    }
    let mut ticks: Vec<f64> = snrs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in ticks {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#, px(x), top + ph + 18.0);
    }
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">SNR (dB)</text>"#, left + pw / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        metric.label()
    );
    for (i, ((mode, beta_bits), pts)) in series.iter().enumerate() {
        let mut pts = pts.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coords: Vec<String> = pts.iter().map(|&(x, v)| format!("{:.2},{:.2}", px(x), py(v))).collect();
        let color = COLORS[*mode % COLORS.len()];
        let beta_idx = series.keys().filter(|k| k.0 == *mode).position(|k| k.1 == *beta_bits).unwrap_or(0);
        let dash = DASHES[beta_idx % DASHES.len()];
        let name = format!("{} beta={} Hz", Mode::ALL[*mode].name(), f64::from_bits(*beta_bits));
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}" points="{}"><title>{name}</title></polyline>"#,
            coords.join(" ")
        );
        let ly = top + 14.0 + 16.0 * i as f64;
        let lx = left + pw + 10.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}"/>"#, ly - 4.0, lx + 20.0, ly - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{name}</text>"#, lx + 24.0);
    }
    s.push_str("</svg>\n");
    s
}

/// `results.csv`, `ber_vs_snr.svg` and `mse_vs_snr.svg` under `dir`.
pub fn write_outputs(result: &CampaignResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    emit_csv(result, &dir.join("results.csv"))?;
    emit_plot(result, PlotMetric::Ber, &dir.join("ber_vs_snr.svg"))?;
    emit_plot(result, PlotMetric::MseCe, &dir.join("mse_vs_snr.svg"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ScenarioConfig;

    fn fake() -> CampaignResult {
        let config = ScenarioConfig::default();
        let mut rows = Vec::new();
        for (bi, beta) in [1e3, 1e4].into_iter().enumerate() {
            for snr in [10.0, 20.0, 30.0] {
                for mode in [Mode::Full, Mode::Genie] {
                    rows.push(ResultRow {
                        m_t: 2,
                        m_r: 2,
                        snr_db: snr,
                        beta_hz: beta,
                        mode,
                        frames: 1,
                        bits: 100,
                        bit_errors: (30.0 - snr) as u64 + bi as u64,
                        ber: ((30.0 - snr) + bi as f64) / 100.0,
                        mse_ce: 1e-2 / snr,
                        mse_k1: 1e-3,
                        flagged_symbols: 0,
                        failed_frames: 0,
                        seed: 1,
                    });
                }
            }
        }
        CampaignResult { config, rows }
    }

    #[test]
    fn csv_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_csv(&fake(), &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines.len(), 13);
        assert_eq!(lines[1], "2,2,10,1000,full,mmse,iterative,1,1,100,20,2.000000e-1,1.000000e-3,1.000000e-3,0,0");
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let svg = render_svg(&fake(), PlotMetric::Ber);
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert_eq!(svg.matches("<svg").count(), 1);
        // zero BER at 30 dB, beta=1k is pinned to the floor
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let err = emit_csv(&fake(), Path::new("/nonexistent-dir/x/results.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x/results.csv"), "{err}");
    }
}
