//! Per-symbol common-phase tracking from pilots and joint detection over
//! mirror-subcarrier pairs.
//!
//! Receive branch `q` sees, on pilot bin `l` (ignoring ICI and noise),
//!
//! ```text
//! x(l)  = k1 U y + k2 U* y#
//! x#(l) = k1* U* y# + k2* U y
//! ```
//!
//! with `U = Upsilon_q`, `y = (H_pre(l) d(l))_q` and `y# = conj((H_pre(-l) d(-l))_q)`.
//! Writing `U = a + jb` makes this linear in the real pair `(a, b)`, which is
//! what [`CpeModel::Rederived`] solves. [`CpeModel::AsPrinted`] builds
//! `C = y X1 + y# X2` from the published update rule instead. Both rows of
//! that matrix are multiples of `(y + y#, y - y#)`, so it has rank one and
//! cannot separate `a` from `b`; it is kept for comparison only.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::EstimatorState;
use crate::framing::{qam16_demap, qam16_slice, PilotValues, SubcarrierMap};
use crate::numerics::{solve_regularized, CMatrix, ComplexGrid};

/// Default bound on `|Upsilon|` before a symbol is flagged as diverged.
pub const UPSILON_CEILING: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CpeModel {
    AsPrinted,
    #[default]
    Rederived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Detector {
    Zf,
    #[default]
    Mmse,
}

/// MMSE regularizer `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MmseRegularizer {
    /// `trace(Psi)/M_r * I`.
    #[default]
    ScaledIdentity,
    /// `Psi (x) I_{M_r}`; only defined when `M_r^2 = 2 M_t`.
    Kronecker,
}

/// How the per-pilot systems are combined into one `Upsilon` per branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PilotCombine {
    /// Solve each pilot separately and average the solutions.
    Average,
    /// Sum the normal equations of all pilots and solve once.
    #[default]
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tracker {
    pub model: CpeModel,
    pub combine: PilotCombine,
}

/// Where the per-symbol CPE correction comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum CpeSource {
    Track(Tracker),
    /// `Upsilon = I`.
    Hold,
    Known(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpeUpdate {
    /// Diagonal of `Upsilon_m`.
    pub upsilon: Vec<Complex64>,
    /// Tracking failed or diverged; `upsilon` is the previous symbol's.
    pub flagged: bool,
}

impl CpeUpdate {
    pub fn identity(m_r: usize) -> Self {
        Self {
            upsilon: vec![Complex64::new(1.0, 0.0); m_r],
            flagged: false,
        }
    }
}

fn j() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

/// `(y, y#)` for branch `q` at pilot `l`.
fn pilot_products(l: i32, q: usize, state: &EstimatorState, pilots: &PilotValues) -> Option<(Complex64, Complex64)> {
    let d = pilots.at(l)?;
    let d_m = pilots.at(-l)?;
    let y = (0..d.len()).map(|p| state.h_pre_at(l)[(q, p)] * d[p]).sum::<Complex64>();
    let y_m = (0..d_m.len()).map(|p| state.h_pre_at(-l)[(q, p)] * d_m[p]).sum::<Complex64>();
    Some((y, y_m.conj()))
}

fn cpe_matrix(model: CpeModel, k1: Complex64, k2: Complex64, y: Complex64, ym: Complex64) -> CMatrix {
    match model {
        CpeModel::Rederived => CMatrix::from_row_slice(
            2,
            2,
            &[
                k1 * y + k2 * ym,
                j() * (k1 * y - k2 * ym),
                k2.conj() * y + k1.conj() * ym,
                j() * (k2.conj() * y - k1.conj() * ym),
            ],
        ),
        CpeModel::AsPrinted => {
            let x1 = CMatrix::from_row_slice(2, 2, &[k1, k1, k2.conj(), k2.conj()]);
            let x2 = CMatrix::from_row_slice(2, 2, &[k1, -k1, k2.conj(), -k2.conj()]);
            x1 * y + x2 * ym
        }
    }
}

/// `(C^H C, C^H z)` for one pilot of one branch.
fn pilot_system(x: &ComplexGrid, l: i32, q: usize, state: &EstimatorState, pilots: &PilotValues, model: CpeModel) -> Result<(CMatrix, CMatrix)> {
    let (y, ym) = pilot_products(l, q, state, pilots).ok_or_else(|| Error::Estimation(format!("bin {l} carries no pilot")))?;
    let c = cpe_matrix(model, state.k1_hat[q], state.k2_hat[q], y, ym);
    let z = CMatrix::from_column_slice(2, 1, &[x.at(l, q), x.at(-l, q).conj()]);
    let ch = c.adjoint();
    Ok((&ch * &c, ch * z))
}

fn solve_phi(gram: &CMatrix, rhs: &CMatrix, psi: f64) -> Result<(f64, f64)> {
    let phi = solve_regularized(gram, psi.max(0.0), rhs, "cpe tracking")?;
    Ok((phi[(0, 0)].re, phi[(1, 0)].re))
}

/// `(a, b)` from one pilot of one branch.
pub(crate) fn pilot_estimate(
    x: &ComplexGrid,
    l: i32,
    q: usize,
    state: &EstimatorState,
    pilots: &PilotValues,
    model: CpeModel,
) -> Result<(f64, f64)> {
    let (gram, rhs) = pilot_system(x, l, q, state, pilots, model)?;
    solve_phi(&gram, &rhs, state.psi[(q, q)].re)
}

fn branch_estimate(x: &ComplexGrid, q: usize, state: &EstimatorState, pilots: &PilotValues, tracker: Tracker) -> Result<Complex64> {
    let psi = state.psi[(q, q)].re;
    let (a, b) = match tracker.combine {
        PilotCombine::Average => {
            let v = pilots
                .bins
                .iter()
                .map(|&l| pilot_estimate(x, l, q, state, pilots, tracker.model))
                .collect::<Result<Vec<_>>>()?;
            let r = v.len() as f64;
            (v.iter().map(|e| e.0).sum::<f64>() / r, v.iter().map(|e| e.1).sum::<f64>() / r)
        }
        PilotCombine::Joint => {
            let (mut gram, mut rhs) = (CMatrix::zeros(2, 2), CMatrix::zeros(2, 1));
            for &l in &pilots.bins {
                let (g, r) = pilot_system(x, l, q, state, pilots, tracker.model)?;
                gram += g;
                rhs += r;
            }
            solve_phi(&gram, &rhs, psi)?
        }
    };
    Ok(Complex64::new(a, b))
}

/// Estimates `Upsilon_m` from the pilots of one received symbol. A branch
/// whose solve fails, or whose estimate exceeds `ceiling` in magnitude, keeps
/// its entry from `previous` and flags the update.
pub fn track_cpe(
    x: &ComplexGrid,
    pilots: &PilotValues,
    state: &EstimatorState,
    tracker: Tracker,
    previous: &[Complex64],
    ceiling: f64,
) -> CpeUpdate {
    let mut update = CpeUpdate {
        upsilon: previous.to_vec(),
        flagged: false,
    };
    if pilots.bins.is_empty() {
        update.flagged = true;
        return update;
    }
    for q in 0..state.m_r() {
        match branch_estimate(x, q, state, pilots, tracker) {
            Ok(u) if u.norm() <= ceiling && u.is_finite() => update.upsilon[q] = u,
            _ => update.flagged = true,
        }
    }
    update
}

/// Stacked mixing matrix for the pair `(k, -k)`:
///
/// ```text
/// [ K1  Hm(k)   K2  Hm#(k) ]
/// [ K2* Hm(k)   K1* Hm#(k) ]
/// ```
///
/// with `Hm(k) = U H_pre(k)` and `Hm#(k) = U* conj(H_pre(-k))`.
pub fn build_w(k: i32, state: &EstimatorState, upsilon: &[Complex64]) -> CMatrix {
    let h = state.h_pre_at(k);
    let hm = state.h_pre_at(-k);
    let (m_r, m_t) = (h.nrows(), h.ncols());
    let mut w = CMatrix::zeros(2 * m_r, 2 * m_t);
    for q in 0..m_r {
        let (k1, k2, u) = (state.k1_hat[q], state.k2_hat[q], upsilon[q]);
        for p in 0..m_t {
            let a = u * h[(q, p)];
            let b = u.conj() * hm[(q, p)].conj();
            w[(q, p)] = k1 * a;
            w[(q, m_t + p)] = k2 * b;
            w[(m_r + q, p)] = k2.conj() * a;
            w[(m_r + q, m_t + p)] = k1.conj() * b;
        }
    }
    w
}

/// `(W^H W + R)^-1 W^H x`; `None` is zero forcing.
pub fn detect(x_stack: &CMatrix, w: &CMatrix, r: Option<&CMatrix>) -> Result<CMatrix> {
    let wh = w.adjoint();
    let mut gram = &wh * w;
    if let Some(r) = r {
        gram += r;
    }
    solve_regularized(&gram, 0.0, &(wh * x_stack), "detection")
}

/// The MMSE `R` for a state, or `None` for zero forcing.
pub fn regularizer(detector: Detector, kind: MmseRegularizer, psi: &CMatrix, m_t: usize) -> Result<Option<CMatrix>> {
    if detector == Detector::Zf {
        return Ok(None);
    }
    let m_r = psi.nrows();
    match kind {
        MmseRegularizer::ScaledIdentity => {
            let sigma2 = psi.trace().re / m_r as f64;
            Ok(Some(CMatrix::identity(2 * m_t, 2 * m_t) * Complex64::new(sigma2, 0.0)))
        }
        MmseRegularizer::Kronecker => {
            if m_r * m_r != 2 * m_t {
                return Err(Error::Config(format!("Psi (x) I is {0}x{0}, detector needs {1}x{1}", m_r * m_r, 2 * m_t)));
            }
            Ok(Some(psi.kronecker(&CMatrix::identity(m_r, m_r))))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualizerOptions {
    pub detector: Detector,
    pub regularizer: MmseRegularizer,
    pub upsilon_ceiling: f64,
}

impl Default for EqualizerOptions {
    fn default() -> Self {
        Self {
            detector: Detector::Mmse,
            regularizer: MmseRegularizer::ScaledIdentity,
            upsilon_ceiling: UPSILON_CEILING,
        }
    }
}

/// Detection result for one data symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolDecision {
    /// Soft estimates on data bins (`N x M_t`, zero elsewhere).
    pub soft: ComplexGrid,
    pub bits: Vec<u8>,
    pub cpe: CpeUpdate,
    /// Positive data bins whose pair `{k, -k}` could not be inverted.
    pub erased: Vec<i32>,
}

impl SymbolDecision {
    /// Bit errors against the transmitted bits of this symbol; every bit on an
    /// erased pair counts as wrong.
    pub fn bit_errors(&self, truth: &[u8], map: &SubcarrierMap) -> usize {
        assert_eq!(truth.len(), self.bits.len());
        let per_ant = map.data().len();
        let m_t = self.soft.m();
        let mut lost = vec![false; per_ant * m_t];
        for &k in &self.erased {
            for kk in [k, -k] {
                let d = map.data().iter().position(|&b| b == kk).expect("data bin");
                for p in 0..m_t {
                    lost[p * per_ant + d] = true;
                }
            }
        }
        self.bits
            .chunks(4)
            .zip(truth.chunks(4))
            .zip(&lost)
            .map(|((a, b), &gone)| if gone { 4 } else { a.iter().zip(b).filter(|(x, y)| x != y).count() })
            .sum()
    }
}

/// Tracks the CPE of one received data symbol, then detects every mirror pair
/// of data bins.
pub fn equalize_symbol(
    x: &ComplexGrid,
    state: &EstimatorState,
    pilots: &PilotValues,
    map: &SubcarrierMap,
    cpe: &CpeSource,
    previous: &[Complex64],
    opts: &EqualizerOptions,
) -> Result<SymbolDecision> {
    let m_t = state.h_pre[0].ncols();
    let m_r = state.m_r();
    let cpe = match cpe {
        CpeSource::Track(t) => track_cpe(x, pilots, state, *t, previous, opts.upsilon_ceiling),
        CpeSource::Hold => CpeUpdate::identity(m_r),
        CpeSource::Known(u) => CpeUpdate {
            upsilon: u.clone(),
            flagged: false,
        },
    };
    let r = regularizer(opts.detector, opts.regularizer, &state.psi, m_t)?;
    let mut soft = ComplexGrid::zeros(x.n(), m_t);
    let mut erased = Vec::new();
    for k in map.data_pairs() {
        let w = build_w(k, state, &cpe.upsilon);
        let mut xs = CMatrix::zeros(2 * m_r, 1);
        for q in 0..m_r {
            xs[(q, 0)] = x.at(k, q);
            xs[(m_r + q, 0)] = x.at(-k, q).conj();
        }
        match detect(&xs, &w, r.as_ref()) {
            Ok(s) => {
                for p in 0..m_t {
                    soft.set(k, p, s[(p, 0)]);
                    soft.set(-k, p, s[(m_t + p, 0)].conj());
                }
            }
            Err(Error::Singular { .. }) => erased.push(k),
            Err(e) => return Err(e),
        }
    }
    let syms: Vec<Complex64> = (0..m_t).flat_map(|p| map.data().iter().map(move |&k| (k, p))).map(|(k, p)| soft.at(k, p)).collect();
    Ok(SymbolDecision {
        bits: qam16_demap(&syms),
        soft,
        cpe,
        erased,
    })
}

/// Hard decisions for a soft grid on data bins.
pub fn slice_grid(soft: &ComplexGrid, map: &SubcarrierMap) -> ComplexGrid {
    let mut out = ComplexGrid::zeros(soft.n(), soft.m());
    for p in 0..soft.m() {
        for &k in map.data() {
            out.set(k, p, qam16_slice(soft.at(k, p)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, ChannelRealization};
    use crate::framing::{pilot_values, qam16_map, QAM16_POINTS};
    use crate::impairments::{combined_freq_model, cpe_of, gen_phase_noise, ici_term, IqParams, PhaseNoiseTrace};
    use crate::numerics::{complex_gaussian, RandomSource};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn state_for(ch: &ChannelRealization, iq: &IqParams, psi: f64) -> EstimatorState {
        let h: Vec<CMatrix> = (0..ch.n()).map(|b| ch.freq_response(crate::numerics::logical_index(b, ch.n())).clone()).collect();
        EstimatorState::new(h, iq.k1(), CMatrix::identity(ch.m_r(), ch.m_r()) * c(psi, 0.0))
    }

    fn random_symbol(m_t: usize, map: &SubcarrierMap, pilots: &PilotValues, rs: &RandomSource) -> ComplexGrid {
        use rand::Rng;
        let mut rng = rs.rng();
        let mut g = ComplexGrid::zeros(map.n(), m_t);
        for p in 0..m_t {
            for &k in map.data() {
                let b: Vec<u8> = (0..4).map(|_| rng.random_range(0..2u8)).collect();
                g.set(k, p, qam16_map(&b).unwrap()[0]);
            }
            for (&k, &d) in pilots.bins.iter().zip(&pilots.values[p]) {
                g.set(k, p, d);
            }
        }
        g
    }

    fn setup(m: usize, seed: u64) -> (SubcarrierMap, PilotValues, ChannelRealization) {
        let map = SubcarrierMap::new(64).unwrap();
        let pilots = pilot_values(m, &map);
        let ch = draw_channel(m, m, 7, 2.0, 64, 16, &RandomSource::new(seed)).unwrap();
        (map, pilots, ch)
    }

    #[test]
    fn no_phase_noise_gives_identity() {
        let (map, pilots, ch) = setup(2, 1);
        let iq = IqParams::uniform(2, 5.0, 10.0);
        let s = random_symbol(2, &map, &pilots, &RandomSource::new(2));
        let x = combined_freq_model(&s, &ch, &PhaseNoiseTrace::zeros(2, 64, 5e-8), 0, &iq).unwrap();
        let u = track_cpe(&x, &pilots, &state_for(&ch, &iq, 0.0), Tracker::default(), &[c(1.0, 0.0); 2], UPSILON_CEILING);
        assert!(!u.flagged);
        for v in u.upsilon {
            assert!((v - 1.0).norm() < 1e-9, "{v}");
        }
    }

    #[test]
    fn pure_rotation_is_recovered() {
        for m in [1, 2, 4] {
            let (map, pilots, ch) = setup(m, 10 + m as u64);
            let iq = IqParams::uniform(m, 5.0, 10.0);
            let s = random_symbol(m, &map, &pilots, &RandomSource::new(3));
            let x = combined_freq_model(&s, &ch, &PhaseNoiseTrace::constant(m, 64, 0.3), 0, &iq).unwrap();
            for combine in [PilotCombine::Average, PilotCombine::Joint] {
                let tracker = Tracker { combine, ..Default::default() };
                let u = track_cpe(&x, &pilots, &state_for(&ch, &iq, 0.0), tracker, &vec![c(1.0, 0.0); m], UPSILON_CEILING);
                for v in u.upsilon {
                    assert!((v - Complex64::from_polar(1.0, 0.3)).norm() < 1e-6, "{combine:?} {v}");
                }
            }
        }
    }

    #[test]
    fn printed_update_matrix_is_rank_one() {
        let (k1, k2) = (c(1.04, -0.05), c(-0.04, -0.05));
        let m = cpe_matrix(CpeModel::AsPrinted, k1, k2, c(0.3, 0.7), c(-1.1, 0.2));
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        assert!(det.norm() < 1e-14);
        let m = cpe_matrix(CpeModel::Rederived, k1, k2, c(0.3, 0.7), c(-1.1, 0.2));
        assert!((m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm() > 0.1);
    }

    #[test]
    fn pilot_averaging_lowers_variance() {
        // fresh channel per trial, so every pilot position is statistically alike
        let map = SubcarrierMap::new(64).unwrap();
        let pilots = pilot_values(2, &map);
        let iq = IqParams::uniform(2, 5.0, 10.0);
        let root = RandomSource::new(99);
        let trials = 200;
        let mut single = vec![Vec::new(); pilots.bins.len()];
        let (mut avg, mut joint) = (Vec::new(), Vec::new());
        for t in 0..trials {
            let ch = draw_channel(2, 2, 7, 2.0, 64, 16, &root.child("ch", t)).unwrap();
            let state = state_for(&ch, &iq, 0.01);
            let s = random_symbol(2, &map, &pilots, &root.child("sym", t));
            let mut x = combined_freq_model(&s, &ch, &PhaseNoiseTrace::zeros(2, 64, 5e-8), 0, &iq).unwrap();
            let mut rng = root.child("noise", t).rng();
            for q in 0..2 {
                for v in x.column_mut(q) {
                    *v += complex_gaussian(&mut rng, 0.01);
                }
            }
            for (i, &l) in pilots.bins.iter().enumerate() {
                let (a, b) = pilot_estimate(&x, l, 0, &state, &pilots, CpeModel::Rederived).unwrap();
                single[i].push(c(a, b));
            }
            let run = |combine| track_cpe(&x, &pilots, &state, Tracker { combine, ..Default::default() }, &[c(1.0, 0.0); 2], f64::INFINITY).upsilon[0];
            avg.push(run(PilotCombine::Average));
            joint.push(run(PilotCombine::Joint));
        }
        let spread = |v: &[Complex64]| v.iter().map(|z| (z - 1.0).norm_sqr()).sum::<f64>() / v.len() as f64;
        let best_single = single.iter().map(|v| spread(v)).fold(f64::INFINITY, f64::min);
        assert!(spread(&avg) < best_single, "{} vs {best_single}", spread(&avg));
        // a faded pilot gets little weight in the pooled solve
        assert!(spread(&joint) < spread(&avg), "{} vs {}", spread(&joint), spread(&avg));
    }

    #[test]
    fn w_decouples_without_impairments() {
        let ch = ChannelRealization::from_taps(64, vec![vec![vec![c(0.5, 0.2), c(0.1, -0.3)]]]).unwrap();
        let st = state_for(&ch, &IqParams::identity(1), 0.0);
        let w = build_w(5, &st, &[c(1.0, 0.0)]);
        assert_eq!(w[(0, 1)], c(0.0, 0.0));
        assert_eq!(w[(1, 0)], c(0.0, 0.0));
        assert!((w[(0, 0)] - ch.freq_response(5)[(0, 0)]).norm() < 1e-15);
        assert!((w[(1, 1)] - ch.freq_response(-5)[(0, 0)].conj()).norm() < 1e-15);
    }

    #[test]
    fn w_rotation_scales_blocks() {
        let (_, _, ch) = setup(2, 6);
        let st = state_for(&ch, &IqParams::uniform(2, 5.0, 10.0), 0.0);
        let u = Complex64::from_polar(1.0, 0.7);
        let (w0, w1) = (build_w(9, &st, &[c(1.0, 0.0); 2]), build_w(9, &st, &[u; 2]));
        for q in 0..2 {
            for p in 0..2 {
                assert!((w1[(q, p)] - w0[(q, p)] * u).norm() < 1e-14);
                assert!((w1[(q, 2 + p)] - w0[(q, 2 + p)] * u.conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn w_reproduces_model_without_ici() {
        let (map, pilots, ch) = setup(2, 7);
        let iq = IqParams::uniform(2, 5.0, 10.0);
        let trace = gen_phase_noise(5e3, 5e-8, 64, 2, false, &RandomSource::new(8)).unwrap();
        let s = random_symbol(2, &map, &pilots, &RandomSource::new(9));
        let x = combined_freq_model(&s, &ch, &trace, 0, &iq).unwrap();
        let zeta = ici_term(&s, &ch, &trace, 0).unwrap();
        let zm = zeta.conj_mirror();
        let (k1, k2) = (iq.k1(), iq.k2());
        let u = cpe_of(&trace, 0, 64).unwrap();
        let st = state_for(&ch, &iq, 0.0);
        for k in map.data_pairs() {
            let w = build_w(k, &st, &u);
            let sv = CMatrix::from_column_slice(4, 1, &[s.at(k, 0), s.at(k, 1), s.at(-k, 0).conj(), s.at(-k, 1).conj()]);
            let got = w * sv;
            for q in 0..2 {
                let leak = k1[q] * zeta.at(k, q) + k2[q] * zm.at(k, q);
                assert!((got[(q, 0)] - (x.at(k, q) - leak)).norm() < 1e-9);
                let leak_m = k1[q].conj() * zm.at(k, q) + k2[q].conj() * zeta.at(k, q);
                assert!((got[(2 + q, 0)] - (x.at(-k, q).conj() - leak_m)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn zf_is_left_inverse_and_mmse_tends_to_zf() {
        let (_, _, ch) = setup(2, 11);
        let st = state_for(&ch, &IqParams::uniform(2, 5.0, 10.0), 0.0);
        let w = build_w(13, &st, &[c(0.9, 0.3), c(1.0, -0.1)]);
        let wh = w.adjoint();
        let a = solve_regularized(&(&wh * &w), 0.0, &wh, "test").unwrap();
        assert!((a * &w - CMatrix::identity(4, 4)).norm() < 1e-10);
        let x = CMatrix::from_column_slice(4, 1, &[c(0.1, 0.2), c(-0.4, 0.3), c(0.7, -0.2), c(0.0, 1.0)]);
        let zf = detect(&x, &w, None).unwrap();
        let r0 = CMatrix::zeros(4, 4);
        assert_eq!(detect(&x, &w, Some(&r0)).unwrap(), zf);
        let tiny = CMatrix::identity(4, 4) * c(1e-12, 0.0);
        assert!((detect(&x, &w, Some(&tiny)).unwrap() - &zf).norm() < 1e-9);
    }

    #[test]
    fn siso_flat_two() {
        let ch = ChannelRealization::from_taps(64, vec![vec![vec![c(2.0, 0.0)]]]).unwrap();
        let st = state_for(&ch, &IqParams::identity(1), 0.0);
        let s = [c(0.3, -0.9), c(-0.1, 0.3)];
        let x = CMatrix::from_column_slice(2, 1, &[s[0] * 2.0, s[1] * 2.0]);
        let out = detect(&x, &build_w(3, &st, &[c(1.0, 0.0)]), None).unwrap();
        assert!((out[(0, 0)] - s[0]).norm() < 1e-15 && (out[(1, 0)] - s[1]).norm() < 1e-15);
    }

    #[test]
    fn genie_zf_exact_for_every_point() {
        let (_, _, ch) = setup(2, 12);
        let iq = IqParams::uniform(2, 5.0, 10.0);
        let st = state_for(&ch, &iq, 0.0);
        let pts: Vec<Complex64> = (0..QAM16_POINTS)
            .map(|i| qam16_map(&[(i >> 3) as u8 & 1, (i >> 2) as u8 & 1, (i >> 1) as u8 & 1, i as u8 & 1]).unwrap()[0])
            .collect();
        let w = build_w(20, &st, &[c(1.0, 0.0); 2]);
        for (i, &a) in pts.iter().enumerate() {
            let s = CMatrix::from_column_slice(4, 1, &[a, pts[(i + 5) % 16], pts[(i + 7) % 16].conj(), pts[(15 - i) % 16].conj()]);
            let est = detect(&(&w * &s), &w, None).unwrap();
            for r in 0..4 {
                assert_eq!(qam16_slice(est[(r, 0)]), qam16_slice(s[(r, 0)]));
                assert!((est[(r, 0)] - s[(r, 0)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn clean_symbol_has_no_errors() {
        for m in [1, 2, 4] {
            let (map, pilots, ch) = setup(m, 20 + m as u64);
            let iq = IqParams::uniform(m, 5.0, 10.0);
            let s = random_symbol(m, &map, &pilots, &RandomSource::new(4));
            let x = combined_freq_model(&s, &ch, &PhaseNoiseTrace::constant(m, 64, -0.2), 0, &iq).unwrap();
            let st = state_for(&ch, &iq, 0.0);
            let opts = EqualizerOptions {
                detector: Detector::Zf,
                ..Default::default()
            };
            let d = equalize_symbol(&x, &st, &pilots, &map, &CpeSource::Track(Tracker::default()), &vec![c(1.0, 0.0); m], &opts).unwrap();
            let want = crate::framing::unload_symbol(&s, &map);
            assert_eq!(d.bit_errors(&want, &map), 0);
            assert!(d.erased.is_empty());
        }
    }

    #[test]
    fn erased_pairs_count_every_bit() {
        let (map, pilots, ch) = setup(2, 30);
        let mut st = state_for(&ch, &IqParams::identity(2), 0.0);
        for h in st.h_pre.iter_mut() {
            h.fill(c(0.0, 0.0));
        }
        let x = ComplexGrid::zeros(64, 2);
        let opts = EqualizerOptions {
            detector: Detector::Zf,
            ..Default::default()
        };
        let d = equalize_symbol(&x, &st, &pilots, &map, &CpeSource::Hold, &[c(1.0, 0.0); 2], &opts).unwrap();
        assert_eq!(d.erased.len(), 24);
        assert_eq!(d.bit_errors(&d.bits.clone(), &map), 48 * 4 * 2);
    }

    #[test]
    fn kronecker_regularizer_dimensions() {
        let psi = CMatrix::identity(2, 2) * c(0.5, 0.0);
        let r = regularizer(Detector::Mmse, MmseRegularizer::Kronecker, &psi, 2).unwrap().unwrap();
        assert_eq!(r.shape(), (4, 4));
        assert!(regularizer(Detector::Mmse, MmseRegularizer::Kronecker, &CMatrix::identity(4, 4), 4).is_err());
        let r = regularizer(Detector::Mmse, MmseRegularizer::ScaledIdentity, &psi, 4).unwrap().unwrap();
        assert_eq!(r[(7, 7)], c(0.5, 0.0));
    }

    #[test]
    fn cpe_update_fixture_round_trip() {
        let u = CpeUpdate {
            upsilon: vec![c(0.9, 0.1), c(1.0, -0.2)],
            flagged: false,
        };
        let json = serde_json::to_string(&u).unwrap();
        assert_eq!(serde_json::from_str::<CpeUpdate>(&json).unwrap(), u);
    }
}
