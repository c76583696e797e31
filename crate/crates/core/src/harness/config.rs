use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::equalization::{CpeModel, Detector, MmseRegularizer, PilotCombine};
use crate::estimation::IqCombine;
use crate::error::{config_err, Error, Result};
use crate::framing::FrameConfig;

/// Which compensation stages run at the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// LS channel from the first long symbol; no IQ or CPE handling.
    Uncompensated,
    /// IQ compensation only; `Upsilon = I`.
    IqOnly,
    /// CPE tracking only; `K1 = I`.
    PnOnly,
    Full,
    /// True effective channel, IQ parameters and per-symbol CPE.
    Genie,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Uncompensated, Mode::IqOnly, Mode::PnOnly, Mode::Full, Mode::Genie];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Uncompensated => "uncompensated",
            Mode::IqOnly => "iq-only",
            Mode::PnOnly => "pn-only",
            Mode::Full => "full",
            Mode::Genie => "genie",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode '{s}' (expected uncompensated, iq-only, pn-only, full or genie)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CeMethod {
    Interp,
    #[default]
    Iterative,
}

/// How the two long symbols are separated into direct and image parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PreambleMethod {
    /// Assume equal phase on both symbols.
    Literal,
    /// Estimate and remove the phase ratio between them first.
    #[default]
    Aligned,
}

impl CeMethod {
    pub fn name(self) -> &'static str {
        match self {
            CeMethod::Interp => "interp",
            CeMethod::Iterative => "iterative",
        }
    }
}

/// One campaign: the sweep grid plus everything a frame needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub frame: FrameConfig,
    pub snr_db: Vec<f64>,
    pub beta_hz: Vec<f64>,
    pub iq_theta_deg: f64,
    pub iq_amp_pct: f64,
    pub frames: usize,
    pub modes: Vec<Mode>,
    pub detector: Detector,
    pub regularizer: MmseRegularizer,
    pub ce_method: CeMethod,
    pub preamble: PreambleMethod,
    pub preamble_iters: usize,
    pub iq_combine: IqCombine,
    pub cpe_model: CpeModel,
    pub pilot_combine: PilotCombine,
    pub master_seed: u64,
    pub channel_taps: usize,
    pub pdp_decay: f64,
    pub refine_iters: usize,
    /// Frames whose IQ estimates are averaged (current plus previous ones).
    pub iq_avg_frames: usize,
    pub shared_oscillator: bool,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            frame: FrameConfig::default(),
            snr_db: vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0],
            beta_hz: vec![5e3],
            iq_theta_deg: 5.0,
            iq_amp_pct: 10.0,
            frames: 100,
            modes: Mode::ALL.to_vec(),
            detector: Detector::Mmse,
            regularizer: MmseRegularizer::ScaledIdentity,
            ce_method: CeMethod::Iterative,
            preamble: PreambleMethod::Aligned,
            preamble_iters: 500,
            iq_combine: IqCombine::Weighted,
            cpe_model: CpeModel::Rederived,
            pilot_combine: PilotCombine::Joint,
            master_seed: 1,
            channel_taps: 7,
            pdp_decay: 2.0,
            refine_iters: 50,
            iq_avg_frames: 2,
            shared_oscillator: false,
            workers: 0,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

/// `5000`, `5e3` or `5k`.
fn hz(key: &str, v: &str) -> Result<f64> {
    let v = v.trim();
    match v.strip_suffix(['k', 'K']) {
        Some(head) => Ok(num::<f64>(key, head)? * 1e3),
        None => num(key, v),
    }
}

/// `a:b:step` (inclusive) or a comma list.
pub fn parse_snr(v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step): (f64, f64, f64) = (num("snr", a)?, num("snr", b)?, num("snr", step)?);
            if step <= 0.0 || b < a {
                return config_err(format!("snr range '{v}' must be a:b:step with a <= b and step > 0"));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| a + step * i as f64).collect())
        }
        [_] => v.split(',').map(|s| num("snr", s)).collect(),
        _ => config_err(format!("snr '{v}' must be a:b:step or a list")),
    }
}

/// `5deg,10pct`.
pub fn parse_iq(v: &str) -> Result<(f64, f64)> {
    let mut deg = None;
    let mut pct = None;
    for part in v.split(',').map(str::trim) {
        if let Some(d) = part.strip_suffix("deg") {
            deg = Some(num("iq", d)?);
        } else if let Some(p) = part.strip_suffix("pct") {
            pct = Some(num("iq", p)?);
        } else {
            return config_err(format!("iq: '{part}' needs a deg or pct suffix"));
        }
    }
    match (deg, pct) {
        (Some(d), Some(p)) => Ok((d, p)),
        _ => config_err(format!("iq '{v}' must look like 5deg,10pct")),
    }
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => config_err(format!("{key}: expected true or false, got '{v}'")),
    }
}

impl ScenarioConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "mimo" => {
                let (t, r) = v.split_once('x').ok_or_else(|| Error::Config(format!("mimo '{v}' must look like 2x2")))?;
                self.frame.m_t = num("mimo", t)?;
                self.frame.m_r = num("mimo", r)?;
            }
            "m_t" => self.frame.m_t = num(key, v)?,
            "m_r" => self.frame.m_r = num(key, v)?,
            "snr" | "snr_db" => self.snr_db = parse_snr(v)?,
            "beta" | "beta_hz" => self.beta_hz = v.split(',').map(|s| hz("beta", s)).collect::<Result<_>>()?,
            "iq" => (self.iq_theta_deg, self.iq_amp_pct) = parse_iq(v)?,
            "iq_theta_deg" => self.iq_theta_deg = num(key, v)?,
            "iq_amp_pct" => self.iq_amp_pct = num(key, v)?,
            "frames" => self.frames = num(key, v)?,
            "mode" | "modes" => self.modes = v.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?,
            "detector" => {
                self.detector = match v {
                    "zf" => Detector::Zf,
                    "mmse" => Detector::Mmse,
                    _ => return config_err(format!("detector '{v}' must be zf or mmse")),
                }
            }
            "regularizer" => {
                self.regularizer = match v {
                    "scaled-identity" => MmseRegularizer::ScaledIdentity,
                    "kronecker" => MmseRegularizer::Kronecker,
                    _ => return config_err(format!("regularizer '{v}' must be scaled-identity or kronecker")),
                }
            }
            "preamble" => {
                self.preamble = match v {
                    "literal" => PreambleMethod::Literal,
                    "aligned" => PreambleMethod::Aligned,
                    _ => return config_err(format!("preamble '{v}' must be literal or aligned")),
                }
            }
            "iq_combine" => {
                self.iq_combine = match v {
                    "mean" => IqCombine::Mean,
                    "weighted" => IqCombine::Weighted,
                    _ => return config_err(format!("iq_combine '{v}' must be mean or weighted")),
                }
            }
            "preamble_iters" => self.preamble_iters = num(key, v)?,
            "ce" | "ce_method" => {
                self.ce_method = match v {
                    "interp" => CeMethod::Interp,
                    "iterative" => CeMethod::Iterative,
                    _ => return config_err(format!("ce '{v}' must be interp or iterative")),
                }
            }
            "cpe_model" => {
                self.cpe_model = match v {
                    "re-derived" => CpeModel::Rederived,
                    "as-printed" => CpeModel::AsPrinted,
                    _ => return config_err(format!("cpe_model '{v}' must be re-derived or as-printed")),
                }
            }
            "pilot_combine" => {
                self.pilot_combine = match v {
                    "average" => PilotCombine::Average,
                    "joint" => PilotCombine::Joint,
                    _ => return config_err(format!("pilot_combine '{v}' must be average or joint")),
                }
            }
            "seed" | "master_seed" => self.master_seed = num(key, v)?,
            "n" | "fft_size" => self.frame.n = num(key, v)?,
            "n_cp" => self.frame.n_cp = num(key, v)?,
            "symbols_per_frame" => self.frame.symbols_per_frame = num(key, v)?,
            "n_short" => self.frame.n_short = num(key, v)?,
            "ts" => self.frame.ts = num(key, v)?,
            "channel_taps" => self.channel_taps = num(key, v)?,
            "pdp_decay" => self.pdp_decay = num(key, v)?,
            "refine_iters" => self.refine_iters = num(key, v)?,
            "iq_avg_frames" => self.iq_avg_frames = num(key, v)?,
            "shared_oscillator" => self.shared_oscillator = boolean(key, v)?,
            "workers" => self.workers = num(key, v)?,
            other => return config_err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Parses flat `key = value` lines over the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        if self.frames == 0 {
            return config_err("frames must be at least 1");
        }
        if self.snr_db.is_empty() || self.beta_hz.is_empty() || self.modes.is_empty() {
            return config_err("snr, beta and mode lists must be nonempty");
        }
        if self.beta_hz.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return config_err("beta must be finite and nonnegative");
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return config_err("snr values must be finite");
        }
        if self.iq_amp_pct <= -100.0 {
            return config_err("amplitude imbalance must exceed -100%");
        }
        if self.channel_taps == 0 || self.channel_taps > self.frame.n_cp {
            return config_err(format!("channel_taps must be in 1..={}", self.frame.n_cp));
        }
        if self.pdp_decay <= 0.0 {
            return config_err("pdp_decay must be positive");
        }
        if self.iq_avg_frames == 0 {
            return config_err("iq_avg_frames must be at least 1");
        }
        if self.regularizer == MmseRegularizer::Kronecker && self.detector == Detector::Mmse && self.frame.m_r * self.frame.m_r != 2 * self.frame.m_t {
            return config_err("kronecker regularizer needs m_r^2 = 2 m_t");
        }
        Ok(())
    }
}
