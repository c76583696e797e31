//! Receiver-side impairments: a free-running Wiener phase-noise process per
//! branch and frequency-independent IQ imbalance per branch.
//!
//! The time-domain injectors are what the simulator runs. The frequency-domain
//! [`combined_freq_model`] predicts the same demodulated grid from the full
//! phase-noise coefficient convolution and the mirror-image mixing, and is
//! kept independent of the transform path so it can serve as a cross-check.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{config_err, Result};
use crate::numerics::{bin_index, ComplexGrid, RandomSource};

/// Per-branch amplitude (`eps`, linear) and phase (`theta`, radians) mismatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqParams {
    pub eps: Vec<f64>,
    pub theta: Vec<f64>,
}

impl IqParams {
    pub fn identity(m_r: usize) -> Self {
        Self {
            eps: vec![1.0; m_r],
            theta: vec![0.0; m_r],
        }
    }

    /// Same mismatch on every branch, e.g. `(5.0, 10.0)` for 5 degrees and 10 %
    /// amplitude excess (`eps = 1.1`).
    pub fn uniform(m_r: usize, theta_deg: f64, amp_pct: f64) -> Self {
        Self {
            eps: vec![1.0 + amp_pct / 100.0; m_r],
            theta: vec![theta_deg.to_radians(); m_r],
        }
    }

    pub fn m_r(&self) -> usize {
        self.eps.len()
    }

    /// Diagonal of `K1 = (1 + eps e^{-j theta}) / 2`.
    pub fn k1(&self) -> Vec<Complex64> {
        self.eps
            .iter()
            .zip(&self.theta)
            .map(|(&e, &t)| (Complex64::new(1.0, 0.0) + Complex64::from_polar(e, -t)) * 0.5)
            .collect()
    }

    /// Diagonal of `K2 = (1 - eps e^{j theta}) / 2`.
    pub fn k2(&self) -> Vec<Complex64> {
        self.eps
            .iter()
            .zip(&self.theta)
            .map(|(&e, &t)| (Complex64::new(1.0, 0.0) - Complex64::from_polar(e, t)) * 0.5)
            .collect()
    }
}

/// Sampled phase path `phi[q][n]` in radians for every receive branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoiseTrace {
    pub phi: Vec<Vec<f64>>,
    /// 3-dB linewidth in Hz.
    pub beta: f64,
    /// Sample period in seconds.
    pub ts: f64,
}

impl PhaseNoiseTrace {
    pub fn zeros(m_r: usize, n_samples: usize, ts: f64) -> Self {
        Self {
            phi: vec![vec![0.0; n_samples]; m_r],
            beta: 0.0,
            ts,
        }
    }

    pub fn constant(m_r: usize, n_samples: usize, phase: f64) -> Self {
        Self {
            phi: vec![vec![phase; n_samples]; m_r],
            beta: 0.0,
            ts: 1.0,
        }
    }

    pub fn m_r(&self) -> usize {
        self.phi.len()
    }

    pub fn len(&self) -> usize {
        self.phi.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-step increment variance `4 pi beta Ts`.
    pub fn step_variance(&self) -> f64 {
        4.0 * PI * self.beta * self.ts
    }
}

/// Wiener phase noise starting at zero: `phi(n+1) = phi(n) + u(n)`,
/// `u ~ N(0, 4 pi beta Ts)`. With `shared`, every branch sees one oscillator.
pub fn gen_phase_noise(beta: f64, ts: f64, n_samples: usize, m_r: usize, shared: bool, rng: &RandomSource) -> Result<PhaseNoiseTrace> {
    if beta < 0.0 || ts <= 0.0 {
        return config_err("phase noise needs beta >= 0 and ts > 0");
    }
    let sigma = (4.0 * PI * beta * ts).sqrt();
    let walk = |src: RandomSource| {
        let mut g = src.rng();
        let mut path = Vec::with_capacity(n_samples);
        let mut phi = 0.0;
        for _ in 0..n_samples {
            path.push(phi);
            let u: f64 = g.sample(StandardNormal);
            phi += sigma * u;
        }
        path
    };
    let phi = if shared {
        vec![walk(rng.child("branch", 0)); m_r]
    } else {
        (0..m_r).map(|q| walk(rng.child("branch", q as u64))).collect()
    };
    Ok(PhaseNoiseTrace { phi, beta, ts })
}

/// Multiplies branch `q` sample `n` by `exp(j phi_q(n))`.
pub fn apply_phase_noise(rx: &[Vec<Complex64>], trace: &PhaseNoiseTrace) -> Result<Vec<Vec<Complex64>>> {
    if rx.len() != trace.m_r() {
        return config_err("phase-noise trace branch count mismatch");
    }
    rx.iter()
        .zip(&trace.phi)
        .map(|(stream, phi)| {
            if stream.len() > phi.len() {
                return config_err(format!("phase-noise trace of {} samples is shorter than stream ({})", phi.len(), stream.len()));
            }
            Ok(stream.iter().zip(phi).map(|(z, &p)| z * Complex64::from_polar(1.0, p)).collect())
        })
        .collect()
}

/// `y_q(n) = K1_q r_q(n) + K2_q conj(r_q(n))`.
pub fn apply_iq_imbalance(rx: &[Vec<Complex64>], iq: &IqParams) -> Vec<Vec<Complex64>> {
    assert_eq!(rx.len(), iq.m_r(), "IQ parameter branch count mismatch");
    let (k1, k2) = (iq.k1(), iq.k2());
    rx.iter()
        .enumerate()
        .map(|(q, s)| s.iter().map(|&z| k1[q] * z + k2[q] * z.conj()).collect())
        .collect()
}

/// Common phase error `Theta_q(0) = (1/N) sum_{n in window} exp(j phi_q(n))`.
pub fn cpe_of(trace: &PhaseNoiseTrace, start: usize, n: usize) -> Result<Vec<Complex64>> {
    if n == 0 || start + n > trace.len() {
        return config_err(format!("CPE window {start}..{} outside trace of {} samples", start + n, trace.len()));
    }
    Ok(trace
        .phi
        .iter()
        .map(|phi| phi[start..start + n].iter().map(|&p| Complex64::from_polar(1.0, p)).sum::<Complex64>() / n as f64)
        .collect())
}

/// Phase-noise spectral coefficients `Theta_q(i) = (1/N) sum_n exp(j phi_q(start+n)) e^{-j2pi in/N}`
/// by direct summation, `coeffs[q][bin]`.
pub fn phase_noise_coefficients(trace: &PhaseNoiseTrace, start: usize, n: usize) -> Result<Vec<Vec<Complex64>>> {
    if start + n > trace.len() {
        return config_err("phase-noise window outside trace");
    }
    Ok(trace
        .phi
        .iter()
        .map(|phi| {
            let p: Vec<Complex64> = phi[start..start + n].iter().map(|&v| Complex64::from_polar(1.0, v)).collect();
            (0..n)
                .map(|i| {
                    p.iter()
                        .enumerate()
                        .map(|(t, &z)| z * Complex64::from_polar(1.0, -2.0 * PI * ((i * t) % n) as f64 / n as f64))
                        .sum::<Complex64>()
                        / n as f64
                })
                .collect()
        })
        .collect())
}

/// Phase-noised, channel-filtered spectrum before IQ mixing:
/// `r_q(k) = sum_i Theta_q(k - i) (H(i) s(i))_q`.
pub fn phase_noised_spectrum(s: &ComplexGrid, ch: &ChannelRealization, trace: &PhaseNoiseTrace, window_start: usize) -> Result<ComplexGrid> {
    let n = s.n();
    let theta = phase_noise_coefficients(trace, window_start, n)?;
    let y = channel_output(s, ch);
    let mut r = ComplexGrid::zeros(n, ch.m_r());
    for (q, th) in theta.iter().enumerate() {
        let yq = y.column(q);
        let rq = r.column_mut(q);
        for (k, out) in rq.iter_mut().enumerate() {
            *out = (0..n).map(|i| th[(k + n - i) % n] * yq[i]).sum();
        }
    }
    Ok(r)
}

/// Noise-free received grid under channel, phase noise and IQ imbalance:
/// `x(k) = K1 r(k) + K2 r#(k)` with `r` the full phase-noised spectrum
/// (common phase error and every inter-carrier term).
pub fn combined_freq_model(
    s: &ComplexGrid,
    ch: &ChannelRealization,
    trace: &PhaseNoiseTrace,
    window_start: usize,
    iq: &IqParams,
) -> Result<ComplexGrid> {
    let r = phase_noised_spectrum(s, ch, trace, window_start)?;
    let mirror = r.conj_mirror();
    let (k1, k2) = (iq.k1(), iq.k2());
    let mut x = ComplexGrid::zeros(r.n(), r.m());
    for q in 0..r.m() {
        for (bin, out) in x.column_mut(q).iter_mut().enumerate() {
            *out = k1[q] * r.column(q)[bin] + k2[q] * mirror.column(q)[bin];
        }
    }
    Ok(x)
}

/// Inter-carrier interference `zeta(k) = r(k) - Theta(0) H(k) s(k)` per branch.
pub fn ici_term(s: &ComplexGrid, ch: &ChannelRealization, trace: &PhaseNoiseTrace, window_start: usize) -> Result<ComplexGrid> {
    let n = s.n();
    let r = phase_noised_spectrum(s, ch, trace, window_start)?;
    let cpe = cpe_of(trace, window_start, n)?;
    let y = channel_output(s, ch);
    let mut z = ComplexGrid::zeros(n, ch.m_r());
    for (q, c) in cpe.iter().enumerate() {
        for bin in 0..n {
            z.column_mut(q)[bin] = r.column(q)[bin] - c * y.column(q)[bin];
        }
    }
    Ok(z)
}

/// `H(k) s(k)` on every bin.
pub fn channel_output(s: &ComplexGrid, ch: &ChannelRealization) -> ComplexGrid {
    let n = s.n();
    let mut y = ComplexGrid::zeros(n, ch.m_r());
    let half = (n / 2) as i32;
    for k in -half..half {
        let h = ch.freq_response(k);
        for q in 0..ch.m_r() {
            let v: Complex64 = (0..s.m()).map(|p| h[(q, p)] * s.at(k, p)).sum();
            y.column_mut(q)[bin_index(k, n)] = v;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_channel;
    use crate::framing::{ofdm_demodulate, ofdm_modulate};
    use crate::numerics::{complex_gaussian, dft, Dft};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_grid(rng: &mut impl Rng, n: usize, m: usize) -> ComplexGrid {
        let cols: Vec<Vec<Complex64>> = (0..m).map(|_| (0..n).map(|_| complex_gaussian(rng, 1.0)).collect()).collect();
        ComplexGrid::from_columns(&cols)
    }

    #[test]
    fn k_values_by_hand() {
        let iq = IqParams::uniform(1, 5.0, 10.0);
        let (k1, k2) = (iq.k1()[0], iq.k2()[0]);
        // (1 + 1.1 e^{-j5deg})/2, (1 - 1.1 e^{j5deg})/2
        assert!((k1 - c(1.047_906, -0.047_936)).norm() < 1e-5, "{k1}");
        assert!((k2 - c(-0.047_906, -0.047_936)).norm() < 1e-5, "{k2}");
        assert!((k2 - (c(1.0, 0.0) - k1.conj())).norm() < 1e-15);
        let id = IqParams::identity(2);
        assert_eq!(id.k1(), vec![c(1.0, 0.0); 2]);
        assert_eq!(id.k2(), vec![c(0.0, 0.0); 2]);
    }

    #[test]
    fn k2_identity_holds_everywhere() {
        for i in 0..50 {
            let iq = IqParams {
                eps: vec![0.5 + i as f64 * 0.03],
                theta: vec![-0.7 + i as f64 * 0.029],
            };
            assert!((iq.k2()[0] - (1.0 - iq.k1()[0].conj())).norm() < 1e-15);
        }
    }

    #[test]
    fn iq_image_rejection_ratio() {
        let n = 64;
        let iq = IqParams::uniform(1, 5.0, 10.0);
        let tone: Vec<Complex64> = (0..n).map(|t| Complex64::from_polar(1.0, 2.0 * PI * 9.0 * t as f64 / n as f64)).collect();
        let out = apply_iq_imbalance(&[tone], &iq);
        let spec = dft(&out[0]).unwrap();
        let (a, b) = (spec[bin_index(9, n)].norm_sqr(), spec[bin_index(-9, n)].norm_sqr());
        let leak: f64 = spec.iter().enumerate().filter(|(i, _)| *i != 9 && *i != n - 9).map(|(_, z)| z.norm_sqr()).sum();
        assert!(leak < 1e-18 * a);
        let want = (iq.k2()[0] / iq.k1()[0]).norm_sqr();
        assert!((b / a - want).abs() < 1e-12);
    }

    #[test]
    fn iq_imbalance_is_invertible() {
        let iq = IqParams::uniform(1, 5.0, 10.0);
        let (k1, k2) = (iq.k1()[0], iq.k2()[0]);
        let s: Vec<Complex64> = (0..16).map(|i| c(i as f64 * 0.1, -0.3 * i as f64)).collect();
        let y = apply_iq_imbalance(&[s.clone()], &iq);
        let det = k1.norm_sqr() - k2.norm_sqr();
        for (orig, &yy) in s.iter().zip(&y[0]) {
            let back = (k1.conj() * yy - k2 * yy.conj()) / det;
            assert!((back - orig).norm() < 1e-12);
        }
    }

    #[test]
    fn wiener_zero_linewidth_is_flat() {
        let t = gen_phase_noise(0.0, 5e-8, 100, 2, false, &RandomSource::new(1)).unwrap();
        assert!(t.phi.iter().flatten().all(|&p| p == 0.0));
        assert!(gen_phase_noise(-1.0, 5e-8, 10, 1, false, &RandomSource::new(1)).is_err());
    }

    #[test]
    fn wiener_step_variance() {
        let t = gen_phase_noise(5e3, 5e-8, 100_001, 1, false, &RandomSource::new(11)).unwrap();
        let steps: Vec<f64> = t.phi[0].windows(2).map(|w| w[1] - w[0]).collect();
        let mean = steps.iter().sum::<f64>() / steps.len() as f64;
        let var = steps.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (steps.len() - 1) as f64;
        let want = 4.0 * PI * 5e3 * 5e-8;
        assert!((want - 3.1416e-3).abs() < 1e-7);
        assert!((var - want).abs() < 0.03 * want, "{var} vs {want}");
    }

    #[test]
    fn branches_independent_unless_shared() {
        let src = RandomSource::new(3);
        let indep = gen_phase_noise(1e4, 5e-8, 50, 2, false, &src).unwrap();
        let shared = gen_phase_noise(1e4, 5e-8, 50, 2, true, &src).unwrap();
        assert_ne!(indep.phi[0], indep.phi[1]);
        assert_eq!(shared.phi[0], shared.phi[1]);
        assert_eq!(indep.phi[0][0], 0.0);
    }

    #[test]
    fn phase_noise_preserves_magnitude_and_checks_length() {
        let trace = gen_phase_noise(1e5, 5e-8, 40, 1, false, &RandomSource::new(4)).unwrap();
        let s: Vec<Complex64> = (0..40).map(|i| c(1.0 + i as f64, 2.0)).collect();
        let out = apply_phase_noise(&[s.clone()], &trace).unwrap();
        for (a, b) in s.iter().zip(&out[0]) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        let zero = apply_phase_noise(&[s.clone()], &PhaseNoiseTrace::zeros(1, 40, 5e-8)).unwrap();
        assert_eq!(zero[0], s);
        assert!(apply_phase_noise(&[vec![c(0.0, 0.0); 41]], &trace).is_err());
    }

    #[test]
    fn constant_phase_rotates_without_ici() {
        let dft_plan = Dft::new(64).unwrap();
        let mut rng = RandomSource::new(5).rng();
        let s = random_grid(&mut rng, 64, 1);
        let tx = ofdm_modulate(&s, 16, &dft_plan).unwrap();
        let trace = PhaseNoiseTrace::constant(1, 80, 0.7);
        let rx = apply_phase_noise(&tx, &trace).unwrap();
        let got = ofdm_demodulate(&rx, 16, &dft_plan).unwrap();
        assert!(got.max_abs_diff(&s.scale(Complex64::from_polar(1.0, 0.7))) < 1e-12);
        let cpe = cpe_of(&trace, 16, 64).unwrap();
        assert!((cpe[0] - Complex64::from_polar(1.0, 0.7)).norm() < 1e-14);
    }

    #[test]
    fn cpe_matches_dft_bin_zero() {
        let trace = gen_phase_noise(5e4, 5e-8, 200, 2, false, &RandomSource::new(6)).unwrap();
        assert!(cpe_of(&trace, 150, 64).is_err());
        let cpe = cpe_of(&trace, 20, 64).unwrap();
        let coeffs = phase_noise_coefficients(&trace, 20, 64).unwrap();
        for q in 0..2 {
            let p: Vec<Complex64> = trace.phi[q][20..84].iter().map(|&v| Complex64::from_polar(1.0, v)).collect();
            let spec = dft(&p).unwrap();
            assert!((cpe[q] - spec[0] / 64.0).norm() < 1e-14);
            assert!(cpe[q].norm() <= 1.0 + 1e-15);
            for (a, b) in coeffs[q].iter().zip(&spec) {
                assert!((a - b / 64.0).norm() < 1e-13);
            }
        }
        let zero = cpe_of(&PhaseNoiseTrace::zeros(1, 64, 5e-8), 0, 64).unwrap();
        assert_eq!(zero[0], c(1.0, 0.0));
    }

    #[test]
    fn model_specializations() {
        let mut rng = RandomSource::new(7).rng();
        let s = random_grid(&mut rng, 64, 2);
        let ch = draw_channel(2, 2, 7, 2.0, 64, 16, &RandomSource::new(8)).unwrap();
        let zero = PhaseNoiseTrace::zeros(2, 100, 5e-8);
        let plain = combined_freq_model(&s, &ch, &zero, 16, &IqParams::identity(2)).unwrap();
        assert!(plain.max_abs_diff(&channel_output(&s, &ch)) < 1e-12);

        let iq = IqParams::uniform(2, 5.0, 10.0);
        let with_iq = combined_freq_model(&s, &ch, &zero, 16, &iq).unwrap();
        let y = channel_output(&s, &ch);
        let ym = y.conj_mirror();
        for q in 0..2 {
            for k in -32..32 {
                let want = iq.k1()[q] * y.at(k, q) + iq.k2()[q] * ym.at(k, q);
                assert!((with_iq.at(k, q) - want).norm() < 1e-12);
            }
        }
        assert!(ici_term(&s, &ch, &zero, 16).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn time_chain_matches_frequency_model() {
        let dft_plan = Dft::new(64).unwrap();
        for seed in 0..5 {
            let root = RandomSource::new(100 + seed);
            let mut rng = root.child("data", 0).rng();
            let s = random_grid(&mut rng, 64, 2);
            let ch = draw_channel(2, 2, 7, 2.0, 64, 16, &root.child("ch", 0)).unwrap();
            let trace = gen_phase_noise(5e4, 5e-8, 80 + 6, 2, false, &root.child("pn", 0)).unwrap();
            let iq = IqParams { eps: vec![1.1, 0.93], theta: vec![0.087, -0.05] };
            let tx = ofdm_modulate(&s, 16, &dft_plan).unwrap();
            let rx = apply_iq_imbalance(&apply_phase_noise(&ch.apply(&tx), &trace).unwrap(), &iq);
            let got = ofdm_demodulate(&rx, 16, &dft_plan).unwrap();
            let want = combined_freq_model(&s, &ch, &trace, 16, &iq).unwrap();
            assert!(got.max_abs_diff(&want) < 1e-10 * want.max_abs());
        }
    }

    #[test]
    fn ici_power_is_parseval_complement_of_cpe() {
        // sum over all coefficients of |Theta(i)|^2 is one for a unit-modulus sequence
        let trace = gen_phase_noise(5e4, 5e-8, 64, 1, false, &RandomSource::new(9)).unwrap();
        let coeffs = phase_noise_coefficients(&trace, 0, 64).unwrap();
        let total: f64 = coeffs[0].iter().map(|z| z.norm_sqr()).sum();
        let ici: f64 = coeffs[0][1..].iter().map(|z| z.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((ici - (1.0 - coeffs[0][0].norm_sqr())).abs() < 1e-12);

        // with white unit-power data on a flat unit channel, the ICI energy averages to that complement
        let ch = ChannelRealization::from_taps(64, vec![vec![vec![c(1.0, 0.0)]]]).unwrap();
        let mut rng = RandomSource::new(10).rng();
        let trials = 400;
        let mut measured = 0.0;
        for _ in 0..trials {
            let s = random_grid(&mut rng, 64, 1);
            let z = ici_term(&s, &ch, &trace, 0).unwrap();
            measured += z.column(0).iter().map(|v| v.norm_sqr()).sum::<f64>() / 64.0;
        }
        measured /= trials as f64;
        assert!((measured - ici).abs() < 0.1 * ici, "{measured} vs {ici}");
    }
}
