use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PreambleEstimate;
use crate::error::{Error, Result};
use crate::framing::{PreambleSet, SubcarrierMap};

/// `|alpha_q|` below this drops the pair for branch `q`.
pub const DEGENERATE_PAIR_TOL: f64 = 1e-9;

/// Averaged IQ estimate, kept as the complex `eps e^{-j theta}` per branch so
/// that further averaging (across frames) never wraps angles.
#[derive(Debug, Clone, PartialEq)]
pub struct IqEstimate {
    pub ratio: Vec<Complex64>,
    pub pairs: Vec<usize>,
}

impl IqEstimate {
    pub fn eps(&self) -> Vec<f64> {
        self.ratio.iter().map(|r| r.norm()).collect()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.ratio.iter().map(|r| -r.arg()).collect()
    }

    /// `K1 = (1 + eps e^{-j theta}) / 2`
    pub fn k1(&self) -> Vec<Complex64> {
        self.ratio.iter().map(|r| (r + 1.0) * 0.5).collect()
    }

    /// `K2 = I - K1*`
    pub fn k2(&self) -> Vec<Complex64> {
        self.k1().iter().map(|k| Complex64::new(1.0, 0.0) - k.conj()).collect()
    }

    /// Equal-weight mean of several frames' estimates.
    pub fn average(estimates: &[IqEstimate]) -> Option<IqEstimate> {
        let first = estimates.first()?;
        let m_r = first.ratio.len();
        let ratio = (0..m_r)
            .map(|q| estimates.iter().map(|e| e.ratio[q]).sum::<Complex64>() / estimates.len() as f64)
            .collect();
        let pairs = (0..m_r).map(|q| estimates.iter().map(|e| e.pairs[q]).sum()).collect();
        Some(IqEstimate { ratio, pairs })
    }
}

/// How the per-pair ratios are combined on each branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IqCombine {
    /// Plain mean of `2 (beta / alpha) - 1` over pairs.
    Mean,
    /// Least-squares fit of `beta = r alpha` over pairs, so that pairs with a
    /// small `alpha` carry little weight; then `2 r - 1`.
    #[default]
    Weighted,
}

/// Averages `2 (beta / alpha) - 1` over adjacent used-bin pairs, where
/// `alpha = e(k) - e(k')` and `beta = chi_a(k) - chi_a(k')`.
///
/// Pairs are consecutive bins of the used set (skipping DC). With several
/// transmit antennas, pairs whose bins share an antenna are skipped.
pub fn estimate_iq_params(est: &PreambleEstimate, pre: &PreambleSet, map: &SubcarrierMap) -> Result<IqEstimate> {
    estimate_iq_params_with(est, pre, map, IqCombine::Mean)
}

/// [`estimate_iq_params`] with a choice of pair combining.
pub fn estimate_iq_params_with(est: &PreambleEstimate, pre: &PreambleSet, map: &SubcarrierMap, combine: IqCombine) -> Result<IqEstimate> {
    let m_r = est.e.m();
    let zero = Complex64::new(0.0, 0.0);
    let mut sum = vec![zero; m_r];
    let mut weight = vec![0.0; m_r];
    let mut pairs = vec![0usize; m_r];
    for w in map.used().windows(2) {
        let (k, k2) = (w[0], w[1]);
        if pre.m_t() > 1 && pre.owner(k) == pre.owner(k2) {
            continue;
        }
        for q in 0..m_r {
            let alpha = est.e.at(k, q) - est.e.at(k2, q);
            if alpha.norm() < DEGENERATE_PAIR_TOL {
                continue;
            }
            let beta = est.chi_a.at(k, q) - est.chi_a.at(k2, q);
            match combine {
                IqCombine::Mean => {
                    sum[q] += beta / alpha * 2.0 - 1.0;
                    weight[q] += 1.0;
                }
                IqCombine::Weighted => {
                    sum[q] += (beta * 2.0 - alpha) * alpha.conj();
                    weight[q] += alpha.norm_sqr();
                }
            }
            pairs[q] += 1;
        }
    }
    if let Some(q) = pairs.iter().position(|&c| c == 0) {
        return Err(Error::Estimation(format!("no usable subcarrier pair for IQ estimation on branch {q}")));
    }
    let ratio = sum.iter().zip(&weight).map(|(s, &w)| s / w).collect();
    Ok(IqEstimate { ratio, pairs })
}
