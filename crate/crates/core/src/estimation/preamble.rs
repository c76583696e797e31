use num_complex::Complex64;

use super::TrainedChannel;
use crate::framing::{PreambleSet, SubcarrierMap};
use crate::numerics::ComplexGrid;

/// Intermediate vectors of the two-symbol estimator, per used bin and branch.
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleEstimate {
    /// `K1 h_p(k) + rho`
    pub chi_a: ComplexGrid,
    /// `K2 h#_p(k) - rho`
    pub chi_b: ComplexGrid,
    /// `chi_a(k) + chi_b#(k)`: the owning antenna's effective-channel column.
    pub e: ComplexGrid,
    pub trained: TrainedChannel,
}

/// Separates the direct and mirror-image parts of the two received long
/// symbols `psi1`, `psi2` (each `N x M_r`).
///
/// With `lambda1`, `lambda2` the training values on bin `k` and `mu1`, `mu2`
/// those on `-k`:
///
/// ```text
/// chi_a(k) = (psi1(k)/lambda1(k)   + psi2(k)/lambda2(k))   / 2
/// chi_b(k) = (psi1(k)/conj(mu1(k)) + psi2(k)/conj(mu2(k))) / 2
/// ```
///
/// Because the second symbol flips sign on exactly one of `k`, `-k`, each sum
/// cancels the other part. `K2 = I - K1*` then makes
/// `e(k) = chi_a(k) + conj(chi_b(-k))` free of the IQ mixing.
pub fn estimate_preamble(psi1: &ComplexGrid, psi2: &ComplexGrid, pre: &PreambleSet, map: &SubcarrierMap) -> PreambleEstimate {
    let (n, m_r) = (psi1.n(), psi1.m());
    assert_eq!((psi2.n(), psi2.m()), (n, m_r));
    let mut chi_a = ComplexGrid::zeros(n, m_r);
    let mut chi_b = ComplexGrid::zeros(n, m_r);
    for &k in map.used() {
        let (l1, l2) = (pre.lambda1(k), pre.lambda2(k));
        let (u1, u2) = (pre.lambda1(-k).conj(), pre.lambda2(-k).conj());
        for q in 0..m_r {
            let (a, b) = (psi1.at(k, q), psi2.at(k, q));
            chi_a.set(k, q, (a / l1 + b / l2) * 0.5);
            chi_b.set(k, q, (a / u1 + b / u2) * 0.5);
        }
    }
    assemble(chi_a, chi_b, pre, map)
}

fn assemble(chi_a: ComplexGrid, chi_b: ComplexGrid, pre: &PreambleSet, map: &SubcarrierMap) -> PreambleEstimate {
    let (n, m_r) = (chi_a.n(), chi_a.m());
    let mirror_b = chi_b.conj_mirror();
    let mut e = ComplexGrid::zeros(n, m_r);
    let mut points = Vec::with_capacity(map.used().len());
    for &k in map.used() {
        let col: Vec<Complex64> = (0..m_r).map(|q| chi_a.at(k, q) + mirror_b.at(k, q)).collect();
        for (q, &v) in col.iter().enumerate() {
            e.set(k, q, v);
        }
        points.push((k, pre.owner(k).expect("used bins are trained"), col));
    }
    PreambleEstimate {
        chi_a,
        chi_b,
        e,
        trained: TrainedChannel::new(n, m_r, pre.m_t(), points),
    }
}

/// Cap on `|kappa| = |K2| / |K1|` inside [`estimate_preamble_aligned`]. Any
/// receiver that is usable at all rejects its image by more than 6 dB, and
/// the `psi1` split degenerates as `|kappa|` approaches 1.
pub const KAPPA_MAX: f64 = 0.5;

/// Convergence threshold on `c` and `kappa` in [`estimate_preamble_aligned`].
pub const ALIGN_TOL: f64 = 1e-14;

/// Like [`estimate_preamble`], but first estimates the common phase ratio
/// `c = Theta2 / Theta1` between the two long symbols on each branch and
/// separates the parts under it.
///
/// Per bin the received pair is `psi1 = A + B`, `psi2 = s_a c A + s_b c* B`,
/// where `A` is the direct part, `B` the mirror image and `s_a`, `s_b` the
/// training sign changes on `k` and `-k`. The mirror image obeys
/// `chi_b(k) = kappa conj(chi_a(-k))` with `kappa = K2 / K1*`, which is what
/// pins `c`: starting from `kappa = 0`, each round splits `psi1` under the
/// current `kappa`, fits `c` to `psi2`, splits both symbols under `c` and
/// refits `kappa`. Each split also pulls `B` toward its value predicted from
/// `psi1` and `kappa`, which keeps it well posed when `c` nears `+-j` and the
/// two symbols stop separating the parts. Rounds stop once neither `c` nor
/// `kappa` moves by more than [`ALIGN_TOL`], or after `max_rounds`. Returns the
/// estimate and `c` per branch.
pub fn estimate_preamble_aligned(
    psi1: &ComplexGrid,
    psi2: &ComplexGrid,
    pre: &PreambleSet,
    map: &SubcarrierMap,
    max_rounds: usize,
) -> (PreambleEstimate, Vec<Complex64>) {
    let (n, m_r) = (psi1.n(), psi1.m());
    assert_eq!((psi2.n(), psi2.m()), (n, m_r));
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let unit = |c: Complex64| if c.norm() > 0.0 { c / c.norm() } else { one };
    // (k, lambda1(k), conj(lambda1(-k)), s_a, s_b)
    let bins: Vec<(i32, Complex64, Complex64, Complex64, Complex64)> = map
        .used()
        .iter()
        .map(|&k| {
            let (l, m) = (pre.lambda1(k), pre.lambda1(-k).conj());
            (k, l, m, pre.lambda2(k) / l, pre.lambda2(-k).conj() / m)
        })
        .collect();
    let mut chi_a = ComplexGrid::zeros(n, m_r);
    let mut chi_b = ComplexGrid::zeros(n, m_r);
    let mut ratios = Vec::with_capacity(m_r);
    for q in 0..m_r {
        let (mut c, mut kappa) = (one, zero);
        for round in 0..=max_rounds {
            let before = (c, kappa);
            // direct and image parts of psi1 under kappa, re-signed for psi2
            let scale = 1.0 - kappa.norm_sqr();
            let parts: Vec<(Complex64, Complex64)> = bins
                .iter()
                .map(|&(k, l, m, sa, sb)| {
                    let (p, pm) = (psi1.at(k, q), psi1.at(-k, q).conj());
                    let u = (p - kappa * pm) / (l * scale);
                    let v = (pm - kappa.conj() * p) / (m * scale);
                    (sa * l * u, sb * m * kappa * v)
                })
                .collect();
            for _ in 0..if round == 0 { 1 } else { 3 } {
                let (mut num, mut den) = (zero, 0.0);
                for (&(k, ..), &(pa, pb)) in bins.iter().zip(&parts) {
                    num += (psi2.at(k, q) - c.conj() * pb) * pa.conj();
                    den += pa.norm_sqr();
                }
                c = if den > 0.0 { unit(num / den) } else { one };
            }
            for (&(k, l, m, sa, sb), &(_, pb)) in bins.iter().zip(&parts) {
                let (p1, p2) = (psi1.at(k, q), psi2.at(k, q));
                let (a, b) = split(p1, p2, sa * c, sb * c.conj(), pb / sb);
                chi_a.set(k, q, a / l);
                chi_b.set(k, q, b / m);
            }
            let (mut num, mut den) = (zero, 0.0);
            for &(k, ..) in &bins {
                let mirror = chi_a.at(-k, q).conj();
                num += chi_b.at(k, q) * mirror.conj();
                den += mirror.norm_sqr();
            }
            kappa = if den > 0.0 { num / den } else { zero };
            if kappa.norm() > KAPPA_MAX {
                kappa *= KAPPA_MAX / kappa.norm();
            }
            if round > 0 && (c - before.0).norm().max((kappa - before.1).norm()) < ALIGN_TOL {
                break;
            }
        }
        ratios.push(c);
    }
    (assemble(chi_a, chi_b, pre, map), ratios)
}

/// Least-squares `(A, B)` from `p1 = A + B`, `p2 = ga A + gb B` and the prior
/// row `B = b0`.
fn split(p1: Complex64, p2: Complex64, ga: Complex64, gb: Complex64, b0: Complex64) -> (Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    let (g11, g12, g22) = (one + ga.norm_sqr(), one + ga.conj() * gb, 2.0 + gb.norm_sqr());
    let (r1, r2) = (p1 + ga.conj() * p2, p1 + gb.conj() * p2 + b0);
    let det = g11 * g22 - g12 * g12.conj();
    ((g22 * r1 - g12 * r2) / det, (g11 * r2 - g12.conj() * r1) / det)
}

/// Plain least squares from the first long symbol alone, ignoring IQ mixing:
/// the owner column at `k` is `psi1(k) / lambda1(k)`.
pub fn least_squares_long1(psi1: &ComplexGrid, pre: &PreambleSet, map: &SubcarrierMap) -> TrainedChannel {
    let points = map
        .used()
        .iter()
        .map(|&k| {
            let l1 = pre.lambda1(k);
            let col = (0..psi1.m()).map(|q| psi1.at(k, q) / l1).collect();
            (k, pre.owner(k).expect("used bins are trained"), col)
        })
        .collect();
    TrainedChannel::new(psi1.n(), psi1.m(), pre.m_t(), points)
}
