//! Preamble-stage estimation.
//!
//! From the two long training symbols the receiver recovers the effective
//! channel `Theta_pre(0) H(k)` on every trained bin without knowing the IQ
//! mixing, then reads the IQ parameters off adjacent-bin differences. The
//! remaining bins are filled by spline interpolation or by transform-domain
//! tap truncation. Null bins of the short symbol give the noise-plus-ICI
//! correlation used to regularize tracking and detection.

mod completion;
mod iq;
mod noise;
mod preamble;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{matrix_serde, CMatrix};

pub use completion::{interpolate_channel, iterative_refine, CompletionReport, TrainedChannel};
pub use iq::{estimate_iq_params, estimate_iq_params_with, IqCombine, IqEstimate, DEGENERATE_PAIR_TOL};
pub use noise::{estimate_noise_ici_corr, null_bin_samples};
pub use preamble::{estimate_preamble, estimate_preamble_aligned, least_squares_long1, ALIGN_TOL, KAPPA_MAX, PreambleEstimate};

/// Everything the tracker and detector need from the preamble stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    /// Effective channel `Theta_pre(0) H(k)` per storage bin; zero on null bins.
    #[serde(with = "matrix_serde::vec")]
    pub h_pre: Vec<CMatrix>,
    pub k1_hat: Vec<Complex64>,
    pub k2_hat: Vec<Complex64>,
    #[serde(with = "matrix_serde")]
    pub psi: CMatrix,
    pub eps_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
}

impl EstimatorState {
    /// State with the given channel and IQ diagonal; `K2` follows from `K2 = I - K1*`.
    pub fn new(h_pre: Vec<CMatrix>, k1_hat: Vec<Complex64>, psi: CMatrix) -> Self {
        let k2_hat = k1_hat.iter().map(|k| Complex64::new(1.0, 0.0) - k.conj()).collect();
        let ratio: Vec<Complex64> = k1_hat.iter().map(|k| k * 2.0 - 1.0).collect();
        Self {
            h_pre,
            k2_hat,
            eps_hat: ratio.iter().map(|r| r.norm()).collect(),
            theta_hat: ratio.iter().map(|r| -r.arg()).collect(),
            k1_hat,
            psi,
        }
    }

    pub fn n(&self) -> usize {
        self.h_pre.len()
    }

    pub fn m_r(&self) -> usize {
        self.k1_hat.len()
    }

    pub fn h_pre_at(&self, k: i32) -> &CMatrix {
        &self.h_pre[crate::numerics::bin_index(k, self.h_pre.len())]
    }
}

/// Per-bin estimation error against a known effective channel, for test runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationDiagnostics {
    /// `(k, e(k) - h_p(k))` for each trained bin, one entry per branch.
    pub residual: Vec<(i32, Vec<Complex64>)>,
    /// Mean residual per branch: the estimate of `rho - rho*`.
    pub delta_proxy: Vec<Complex64>,
}

impl EstimationDiagnostics {
    pub fn against(est: &PreambleEstimate, truth: &[CMatrix]) -> Self {
        let n = truth.len();
        let residual: Vec<(i32, Vec<Complex64>)> = est
            .trained
            .points()
            .iter()
            .map(|&(k, p, ref col)| {
                let h = &truth[crate::numerics::bin_index(k, n)];
                (k, col.iter().enumerate().map(|(q, v)| v - h[(q, p)]).collect())
            })
            .collect();
        let m_r = residual.first().map_or(0, |r| r.1.len());
        let delta_proxy = (0..m_r)
            .map(|q| residual.iter().map(|r| r.1[q]).sum::<Complex64>() / residual.len().max(1) as f64)
            .collect();
        Self { residual, delta_proxy }
    }
}
