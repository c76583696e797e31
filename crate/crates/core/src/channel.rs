//! Quasi-static multipath Rayleigh MIMO channel with an exponential power
//! delay profile.
//!
//! A realization holds the `L`-tap impulse response of every
//! (receive, transmit) pair and caches the per-subcarrier response matrices
//! `H(k)[q][p] = sum_n h_qp(n) e^{-j2pi kn/N}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::numerics::{bin_index, complex_gaussian, CMatrix, RandomSource};

/// Tap powers `exp(-l/decay)` normalized to sum to one.
pub fn exponential_pdp(taps: usize, decay: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..taps).map(|l| (-(l as f64) / decay).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelFixture", into = "ChannelFixture")]
pub struct ChannelRealization {
    n: usize,
    /// `taps[q][p][l]`
    taps: Vec<Vec<Vec<Complex64>>>,
    pdp: Vec<f64>,
    /// Indexed by storage bin.
    freq: Vec<CMatrix>,
}

/// On-disk layout: taps as `[re, im]` pairs, `taps[q][p][l]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChannelFixture {
    n: usize,
    pdp: Vec<f64>,
    taps: Vec<Vec<Vec<Complex64>>>,
}

impl TryFrom<ChannelFixture> for ChannelRealization {
    type Error = Error;

    fn try_from(f: ChannelFixture) -> Result<Self> {
        Self::with_pdp(f.n, f.taps, f.pdp)
    }
}

impl From<ChannelRealization> for ChannelFixture {
    fn from(c: ChannelRealization) -> Self {
        Self {
            n: c.n,
            pdp: c.pdp,
            taps: c.taps,
        }
    }
}

/// Draws one realization: every tap `h_qp(l) ~ CN(0, pdp(l))`, links independent.
pub fn draw_channel(
    m_t: usize,
    m_r: usize,
    taps: usize,
    decay: f64,
    n: usize,
    n_cp: usize,
    rng: &RandomSource,
) -> Result<ChannelRealization> {
    if taps == 0 || taps > n_cp || taps > n {
        return config_err(format!("{taps} channel taps not covered by a {n_cp}-sample cyclic prefix"));
    }
    if decay <= 0.0 {
        return config_err("power delay profile decay must be positive");
    }
    let pdp = exponential_pdp(taps, decay);
    let mut g = rng.rng();
    let h = (0..m_r)
        .map(|_| {
            (0..m_t)
                .map(|_| pdp.iter().map(|&p| complex_gaussian(&mut g, p)).collect())
                .collect()
        })
        .collect();
    ChannelRealization::with_pdp(n, h, pdp)
}

impl ChannelRealization {
    /// Realization from explicit taps `taps[q][p][l]`; the profile is taken as uniform.
    pub fn from_taps(n: usize, taps: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        let l = taps.first().and_then(|r| r.first()).map_or(0, Vec::len);
        Self::with_pdp(n, taps, vec![1.0 / l.max(1) as f64; l])
    }

    fn with_pdp(n: usize, taps: Vec<Vec<Vec<Complex64>>>, pdp: Vec<f64>) -> Result<Self> {
        let m_r = taps.len();
        let m_t = taps.first().map_or(0, Vec::len);
        let l = pdp.len();
        if m_r == 0 || m_t == 0 || l == 0 {
            return config_err("empty channel");
        }
        if taps.iter().any(|row| row.len() != m_t || row.iter().any(|h| h.len() != l)) {
            return config_err("ragged channel taps");
        }
        if l > n {
            return config_err("more taps than subcarriers");
        }
        let freq = (0..n)
            .map(|bin| {
                CMatrix::from_fn(m_r, m_t, |q, p| tap_response(&taps[q][p], bin as f64, n))
            })
            .collect();
        Ok(Self { n, taps, pdp, freq })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m_r(&self) -> usize {
        self.taps.len()
    }

    pub fn m_t(&self) -> usize {
        self.taps[0].len()
    }

    pub fn len(&self) -> usize {
        self.pdp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pdp.is_empty()
    }

    pub fn pdp(&self) -> &[f64] {
        &self.pdp
    }

    pub fn taps(&self, q: usize, p: usize) -> &[Complex64] {
        &self.taps[q][p]
    }

    /// `H(k)` for logical subcarrier `k`.
    pub fn freq_response(&self, k: i32) -> &CMatrix {
        &self.freq[bin_index(k, self.n)]
    }

    /// Linear convolution of each transmit stream with its taps, summed per
    /// receive antenna. Output streams are `L - 1` samples longer.
    pub fn apply(&self, tx: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        assert_eq!(tx.len(), self.m_t(), "one stream per transmit antenna");
        let len = tx.first().map_or(0, Vec::len);
        assert!(tx.iter().all(|s| s.len() == len), "transmit streams differ in length");
        let out_len = len + self.len() - 1;
        self.taps
            .iter()
            .map(|row| {
                let mut out = vec![Complex64::new(0.0, 0.0); out_len];
                for (h, s) in row.iter().zip(tx) {
                    for (i, &x) in s.iter().enumerate() {
                        for (l, &hl) in h.iter().enumerate() {
                            out[i + l] += hl * x;
                        }
                    }
                }
                out
            })
            .collect()
    }
}

fn tap_response(h: &[Complex64], k: f64, n: usize) -> Complex64 {
    h.iter()
        .enumerate()
        .map(|(i, &hi)| hi * Complex64::from_polar(1.0, -2.0 * PI * k * i as f64 / n as f64))
        .sum()
}
