use num_complex::Complex64;
use rand::Rng;

use super::config::{CeMethod, Mode, PreambleMethod, ScenarioConfig};
use super::metrics::{compute_mse_ce, compute_mse_k1};
use crate::channel::{draw_channel, ChannelRealization};
use crate::equalization::{equalize_symbol, CpeSource, EqualizerOptions, Tracker};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_iq_params_with, estimate_noise_ici_corr, estimate_preamble, estimate_preamble_aligned, interpolate_channel, iterative_refine, least_squares_long1,
    null_bin_samples, EstimatorState, IqEstimate, PreambleEstimate, TrainedChannel,
};
use crate::framing::{
    assemble_frame, build_preamble, ofdm_demodulate_frame, ofdm_modulate_frame, pilot_values, PilotValues, PreambleSet, SubcarrierMap,
    PREAMBLE_SEED,
};
use crate::impairments::{apply_iq_imbalance, apply_phase_noise, cpe_of, gen_phase_noise, IqParams, PhaseNoiseTrace};
use crate::numerics::{complex_gaussian, logical_index, CMatrix, ComplexGrid, Dft, RandomSource};

/// Fixed per-campaign pieces shared by every frame.
pub struct Link {
    pub cfg: ScenarioConfig,
    pub map: SubcarrierMap,
    pub pre: PreambleSet,
    pub pilots: PilotValues,
    pub dft: Dft,
    pub iq: IqParams,
}

/// One frame after the receiver front end, with the ground truth that produced it.
pub struct ReceivedFrame {
    /// Demodulated symbols, `N x M_r` each.
    pub grids: Vec<ComplexGrid>,
    pub channel: ChannelRealization,
    pub trace: PhaseNoiseTrace,
    pub bits: Vec<u8>,
    /// Transmitted symbols, `N x M_t` each.
    pub tx: Vec<ComplexGrid>,
}

/// Receiver products of the two long symbols and the short symbol(s).
pub struct PreambleStage {
    pub psi: Result<CMatrix>,
    pub estimate: PreambleEstimate,
    pub iq: Result<IqEstimate>,
}

/// Shared failures are reported once per consumer.
fn dup(e: &Error) -> Error {
    Error::Estimation(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub bit_errors: u64,
    pub bits: u64,
    pub mse_ce: f64,
    pub mse_k1: f64,
    pub flagged_symbols: u64,
}

/// Randomness for frame `f`; negative indices are warm-up frames that only
/// feed IQ averaging for the first frames of a point.
pub fn frame_source(root: &RandomSource, f: i64) -> RandomSource {
    if f >= 0 {
        root.child("frame", f as u64)
    } else {
        root.child("warmup", f.unsigned_abs())
    }
}

impl Link {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let fc = &cfg.frame;
        let map = SubcarrierMap::new(fc.n)?;
        Ok(Self {
            pre: build_preamble(fc.m_t, &map, PREAMBLE_SEED),
            pilots: pilot_values(fc.m_t, &map),
            dft: Dft::new(fc.n)?,
            iq: IqParams::uniform(fc.m_r, cfg.iq_theta_deg, cfg.iq_amp_pct),
            map,
            cfg: cfg.clone(),
        })
    }

    /// Per-sample time-domain noise variance for a per-receive-antenna SNR on
    /// used subcarriers. A data bin carries `M_t` units of signal power
    /// through a unit-energy channel, and the unnormalized forward DFT turns
    /// time variance `v` into `N v` per bin.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        let fc = &self.cfg.frame;
        fc.m_t as f64 / (10f64.powf(snr_db / 10.0) * fc.n as f64)
    }

    /// Transmits frame `f` through channel, AWGN, phase noise and IQ imbalance
    /// (in that order) and demodulates it.
    pub fn receive(&self, snr_db: f64, beta: f64, root: &RandomSource, f: i64) -> Result<ReceivedFrame> {
        let fc = &self.cfg.frame;
        let src = frame_source(root, f);
        let channel = draw_channel(fc.m_t, fc.m_r, self.cfg.channel_taps, self.cfg.pdp_decay, fc.n, fc.n_cp, &src.child("channel", 0))?;
        let mut rng = src.child("payload", 0).rng();
        let bits: Vec<u8> = (0..fc.payload_bits(&self.map)).map(|_| rng.random_range(0..2u8)).collect();
        let frame = assemble_frame(fc, &self.map, &bits, &self.pilots)?;
        let tx = ofdm_modulate_frame(&frame.symbols, fc.n_cp, &self.dft)?;
        let len = fc.frame_samples();
        let sigma = self.noise_variance(snr_db).sqrt();
        let mut rx = channel.apply(&tx);
        for (q, stream) in rx.iter_mut().enumerate() {
            stream.truncate(len);
            let mut g = src.child("noise", q as u64).rng();
            for z in stream.iter_mut() {
                *z += complex_gaussian(&mut g, 1.0) * sigma;
            }
        }
        let trace = gen_phase_noise(beta, fc.ts, len, fc.m_r, self.cfg.shared_oscillator, &src.child("pn", 0))?;
        let rx = apply_iq_imbalance(&apply_phase_noise(&rx, &trace)?, &self.iq);
        let grids = ofdm_demodulate_frame(&rx, fc.symbols_per_frame, fc.n_cp, &self.dft)?;
        Ok(ReceivedFrame {
            grids,
            channel,
            trace,
            bits,
            tx: frame.symbols,
        })
    }

    pub fn preamble_stage(&self, rx: &ReceivedFrame) -> PreambleStage {
        let fc = &self.cfg.frame;
        let psi = estimate_noise_ici_corr(&null_bin_samples(&rx.grids[..fc.n_short], &self.map));
        let l1 = fc.long1_index();
        let (psi1, psi2) = (&rx.grids[l1], &rx.grids[l1 + 1]);
        let estimate = match self.cfg.preamble {
            PreambleMethod::Literal => estimate_preamble(psi1, psi2, &self.pre, &self.map),
            PreambleMethod::Aligned => estimate_preamble_aligned(psi1, psi2, &self.pre, &self.map, self.cfg.preamble_iters).0,
        };
        let iq = estimate_iq_params_with(&estimate, &self.pre, &self.map, self.cfg.iq_combine);
        PreambleStage { psi, estimate, iq }
    }

    /// Averages the IQ estimate of frame `f` with those of the frames before it.
    pub fn averaged_iq(&self, stage: &PreambleStage, snr_db: f64, beta: f64, root: &RandomSource, f: i64) -> Result<IqEstimate> {
        let mut ests = Vec::with_capacity(self.cfg.iq_avg_frames);
        if let Ok(e) = &stage.iq {
            ests.push(e.clone());
        }
        for back in 1..self.cfg.iq_avg_frames as i64 {
            let prev = self.receive(snr_db, beta, root, f - back)?;
            if let Ok(e) = self.preamble_stage(&prev).iq {
                ests.push(e);
            }
        }
        match IqEstimate::average(&ests) {
            Some(e) => Ok(e),
            None => stage.iq.as_ref().cloned().map_err(dup),
        }
    }

    fn tracker(&self) -> Tracker {
        Tracker {
            model: self.cfg.cpe_model,
            combine: self.cfg.pilot_combine,
        }
    }

    pub fn complete(&self, trained: &TrainedChannel) -> Result<Vec<CMatrix>> {
        Ok(match self.cfg.ce_method {
            CeMethod::Interp => interpolate_channel(trained, &self.map).h_pre,
            CeMethod::Iterative => iterative_refine(trained, &self.map, self.cfg.channel_taps, self.cfg.refine_iters, &self.dft)?.h_pre,
        })
    }

    /// CPE of every symbol's FFT window, `[symbol][branch]`.
    pub fn true_cpe(&self, rx: &ReceivedFrame) -> Result<Vec<Vec<Complex64>>> {
        let fc = &self.cfg.frame;
        (0..fc.symbols_per_frame)
            .map(|m| cpe_of(&rx.trace, m * fc.symbol_len() + fc.n_cp, fc.n))
            .collect()
    }

    /// `Theta_pre(0) H(k)` on used bins, zero elsewhere; `Theta_pre` is the
    /// CPE of the first long symbol.
    pub fn true_effective_channel(&self, rx: &ReceivedFrame, cpe: &[Vec<Complex64>]) -> Vec<CMatrix> {
        let fc = &self.cfg.frame;
        let theta = &cpe[fc.long1_index()];
        (0..fc.n)
            .map(|bin| {
                let k = logical_index(bin, fc.n);
                if !self.map.is_used(k) {
                    return CMatrix::zeros(fc.m_r, fc.m_t);
                }
                crate::numerics::diag_mul(theta, rx.channel.freq_response(k))
            })
            .collect()
    }

    /// Runs one compensation mode over a received frame.
    pub fn process(&self, mode: Mode, rx: &ReceivedFrame, stage: &PreambleStage, iq_avg: Option<&Result<IqEstimate>>) -> Result<FrameOutcome> {
        let fc = &self.cfg.frame;
        let psi = stage.psi.as_ref().map_err(dup)?.clone();
        let cpe = self.true_cpe(rx)?;
        let h_eff = self.true_effective_channel(rx, &cpe);
        let ones = vec![Complex64::new(1.0, 0.0); fc.m_r];
        let estimated_k1 = || -> Result<Vec<Complex64>> {
            match iq_avg {
                Some(Ok(e)) => Ok(e.k1()),
                Some(Err(e)) => Err(dup(e)),
                None => stage.iq.as_ref().map(IqEstimate::k1).map_err(dup),
            }
        };
        let (state, tracking) = match mode {
            Mode::Genie => (EstimatorState::new(h_eff.clone(), self.iq.k1(), psi), None),
            Mode::Uncompensated => {
                let h = self.complete(&least_squares_long1(&rx.grids[fc.long1_index()], &self.pre, &self.map))?;
                (EstimatorState::new(h, ones.clone(), psi), Some(CpeSource::Hold))
            }
            Mode::IqOnly => (
                EstimatorState::new(self.complete(&stage.estimate.trained)?, estimated_k1()?, psi),
                Some(CpeSource::Hold),
            ),
            Mode::PnOnly => (
                EstimatorState::new(self.complete(&stage.estimate.trained)?, ones.clone(), psi),
                Some(CpeSource::Track(self.tracker())),
            ),
            Mode::Full => (
                EstimatorState::new(self.complete(&stage.estimate.trained)?, estimated_k1()?, psi),
                Some(CpeSource::Track(self.tracker())),
            ),
        };
        let opts = EqualizerOptions {
            detector: self.cfg.detector,
            regularizer: self.cfg.regularizer,
            ..Default::default()
        };
        let per_symbol = fc.bits_per_symbol(&self.map);
        let theta_pre = &cpe[fc.long1_index()];
        let mut previous = ones;
        let mut outcome = FrameOutcome {
            bit_errors: 0,
            bits: 0,
            mse_ce: compute_mse_ce(&state.h_pre, &h_eff, self.map.used()),
            mse_k1: compute_mse_k1(&state.k1_hat, &self.iq.k1()),
            flagged_symbols: 0,
        };
        for (m, truth) in rx.bits.chunks(per_symbol).enumerate() {
            let idx = fc.first_data_index() + m;
            let source = match &tracking {
                Some(s) => s.clone(),
                None => CpeSource::Known(cpe[idx].iter().zip(theta_pre).map(|(a, b)| a / b).collect()),
            };
            let d = equalize_symbol(&rx.grids[idx], &state, &self.pilots, &self.map, &source, &previous, &opts)?;
            outcome.bit_errors += d.bit_errors(truth, &self.map) as u64;
            outcome.bits += truth.len() as u64;
            outcome.flagged_symbols += u64::from(d.cpe.flagged);
            previous = d.cpe.upsilon;
        }
        Ok(outcome)
    }

    /// Every configured mode on frame `f` of one sweep point.
    pub fn run_frame(&self, snr_db: f64, beta: f64, root: &RandomSource, f: i64) -> Vec<Result<FrameOutcome>> {
        let rx = match self.receive(snr_db, beta, root, f) {
            Ok(rx) => rx,
            Err(e) => return self.cfg.modes.iter().map(|_| Err(dup(&e))).collect(),
        };
        let stage = self.preamble_stage(&rx);
        let needs_iq = self.cfg.modes.iter().any(|m| matches!(m, Mode::Full | Mode::IqOnly));
        let iq_avg = needs_iq.then(|| self.averaged_iq(&stage, snr_db, beta, root, f));
        self.cfg
            .modes
            .iter()
            .map(|&mode| self.process(mode, &rx, &stage, iq_avg.as_ref()))
            .collect()
    }
}
