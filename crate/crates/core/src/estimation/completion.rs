use log::warn;
use num_complex::Complex64;

use crate::error::{config_err, Result};
use crate::framing::SubcarrierMap;
use crate::numerics::{bin_index, logical_index, CMatrix, Dft};

/// Effective-channel columns measured on trained bins: `(k, p, column)` where
/// `column[q]` estimates `h_qp(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedChannel {
    n: usize,
    m_r: usize,
    m_t: usize,
    points: Vec<(i32, usize, Vec<Complex64>)>,
}

impl TrainedChannel {
    pub fn new(n: usize, m_r: usize, m_t: usize, points: Vec<(i32, usize, Vec<Complex64>)>) -> Self {
        Self { n, m_r, m_t, points }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[(i32, usize, Vec<Complex64>)] {
        &self.points
    }

    /// `(k, h_qp(k))` knots for one antenna pair, ascending in `k`.
    pub fn knots(&self, q: usize, p: usize) -> Vec<(f64, Complex64)> {
        let mut out: Vec<(f64, Complex64)> = self
            .points
            .iter()
            .filter(|(_, owner, _)| *owner == p)
            .map(|(k, _, col)| (*k as f64, col[q]))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    fn empty_channel(&self) -> Vec<CMatrix> {
        vec![CMatrix::zeros(self.m_r, self.m_t); self.n]
    }

    fn reimpose(&self, h: &mut [CMatrix]) {
        for (k, p, col) in &self.points {
            for (q, &v) in col.iter().enumerate() {
                h[bin_index(*k, self.n)][(q, *p)] = v;
            }
        }
    }
}

/// Completed effective channel plus anything worth surfacing about how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionReport {
    /// Per storage bin; zero on null bins.
    pub h_pre: Vec<CMatrix>,
    pub warnings: Vec<String>,
}

/// Natural cubic spline through real knots, extrapolating linearly.
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n >= 3 {
            // tridiagonal system for interior second derivatives
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 2..n - 1 {
                let w = (x[i] - x[i - 1]) / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            for i in (1..n - 1).rev() {
                m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
            }
        }
        Self { x, y, m }
    }

    fn slope(&self, i: usize) -> f64 {
        // derivative at the left end of interval i
        let h = self.x[i + 1] - self.x[i];
        (self.y[i + 1] - self.y[i]) / h - h * (2.0 * self.m[i] + self.m[i + 1]) / 6.0
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if n == 1 {
            return self.y[0];
        }
        if t <= self.x[0] {
            return self.y[0] + self.slope(0) * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            let h = self.x[n - 1] - self.x[n - 2];
            let end_slope = (self.y[n - 1] - self.y[n - 2]) / h + h * (self.m[n - 2] + 2.0 * self.m[n - 1]) / 6.0;
            return self.y[n - 1] + end_slope * (t - self.x[n - 1]);
        }
        let i = self.x.partition_point(|&v| v <= t).saturating_sub(1).min(n - 2);
        let h = self.x[i + 1] - self.x[i];
        let (a, b) = ((self.x[i + 1] - t) / h, (t - self.x[i]) / h);
        a * self.y[i] + b * self.y[i + 1] + ((a.powi(3) - a) * self.m[i] + (b.powi(3) - b) * self.m[i + 1]) * h * h / 6.0
    }
}

fn linear_eval(knots: &[(f64, Complex64)], t: f64) -> Complex64 {
    match knots {
        [] => Complex64::new(0.0, 0.0),
        [(_, v)] => *v,
        _ => {
            let i = knots.partition_point(|(x, _)| *x <= t).clamp(1, knots.len() - 1);
            let ((x0, y0), (x1, y1)) = (knots[i - 1], knots[i]);
            y0 + (y1 - y0) * ((t - x0) / (x1 - x0))
        }
    }
}

/// Fills every used bin by cubic-spline interpolation of the real and
/// imaginary parts against logical bin index, per antenna pair. Pairs with
/// fewer than four knots fall back to linear interpolation with a warning.
pub fn interpolate_channel(trained: &TrainedChannel, map: &SubcarrierMap) -> CompletionReport {
    let (h, warnings) = spline_fill(trained, map.used());
    CompletionReport { h_pre: h, warnings }
}

fn spline_fill(trained: &TrainedChannel, bins: &[i32]) -> (Vec<CMatrix>, Vec<String>) {
    let mut h = trained.empty_channel();
    let mut warnings = Vec::new();
    for p in 0..trained.m_t {
        for q in 0..trained.m_r {
            let knots = trained.knots(q, p);
            if knots.len() < 4 {
                let msg = format!("antenna pair ({q},{p}) has {} trained bins; using linear interpolation", knots.len());
                warn!("{msg}");
                warnings.push(msg);
                for &k in bins {
                    h[bin_index(k, trained.n)][(q, p)] = linear_eval(&knots, k as f64);
                }
                continue;
            }
            let xs: Vec<f64> = knots.iter().map(|(x, _)| *x).collect();
            let re = Spline::new(xs.clone(), knots.iter().map(|(_, v)| v.re).collect());
            let im = Spline::new(xs, knots.iter().map(|(_, v)| v.im).collect());
            for &k in bins {
                h[bin_index(k, trained.n)][(q, p)] = Complex64::new(re.eval(k as f64), im.eval(k as f64));
            }
        }
    }
    trained.reimpose(&mut h);
    (h, warnings)
}

/// Transform-domain refinement: starting from the spline fill (guard bins
/// bridged linearly across the band edge), repeatedly truncate the impulse
/// response to `l_taps` taps and restore the measured bins.
pub fn iterative_refine(trained: &TrainedChannel, map: &SubcarrierMap, l_taps: usize, n_iters: usize, dft: &Dft) -> Result<CompletionReport> {
    let n = trained.n;
    if dft.len() != n {
        return config_err("transform size does not match the channel grid");
    }
    if l_taps == 0 || l_taps > n {
        return config_err(format!("cannot truncate to {l_taps} taps"));
    }
    let (lo, hi) = (map.used()[0], *map.used().last().expect("used bins"));
    let band: Vec<i32> = (lo..=hi).collect();
    let (start, warnings) = spline_fill(trained, &band);
    let guard_span = (n as i32 - (hi - lo)) as f64;
    let mut h = trained.empty_channel();
    for p in 0..trained.m_t {
        for q in 0..trained.m_r {
            let known: Vec<(usize, Complex64)> = trained
                .points
                .iter()
                .filter(|(_, owner, _)| *owner == p)
                .map(|(k, _, col)| (bin_index(*k, n), col[q]))
                .collect();
            let (edge_hi, edge_lo) = (start[bin_index(hi, n)][(q, p)], start[bin_index(lo, n)][(q, p)]);
            let mut spec: Vec<Complex64> = (0..n)
                .map(|bin| {
                    let k = logical_index(bin, n);
                    if k >= lo && k <= hi {
                        start[bin][(q, p)]
                    } else {
                        // distance walked from the upper edge towards the lower one across +-N/2
                        let d = (k - hi).rem_euclid(n as i32) as f64;
                        edge_hi + (edge_lo - edge_hi) * (d / guard_span)
                    }
                })
                .collect();
            for _ in 0..n_iters {
                dft.inverse_in_place(&mut spec)?;
                spec[l_taps..].iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                dft.forward_in_place(&mut spec)?;
                for &(bin, v) in &known {
                    spec[bin] = v;
                }
            }
            for &k in map.used() {
                let bin = bin_index(k, n);
                h[bin][(q, p)] = spec[bin];
            }
        }
    }
    Ok(CompletionReport { h_pre: h, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, ChannelRealization};
    use crate::framing::{build_preamble, PREAMBLE_SEED};
    use crate::numerics::RandomSource;

    fn trained_from(ch: &ChannelRealization, m_t: usize, map: &SubcarrierMap) -> TrainedChannel {
        let pre = build_preamble(m_t, map, PREAMBLE_SEED);
        let points = map
            .used()
            .iter()
            .map(|&k| {
                let p = pre.owner(k).unwrap();
                let h = ch.freq_response(k);
                (k, p, (0..ch.m_r()).map(|q| h[(q, p)]).collect())
            })
            .collect();
        TrainedChannel::new(64, ch.m_r(), m_t, points)
    }

    fn untrained_error(h: &[CMatrix], ch: &ChannelRealization, tr: &TrainedChannel, map: &SubcarrierMap) -> f64 {
        let mut err = 0.0;
        let mut pow = 0.0;
        for &k in map.used() {
            let want = ch.freq_response(k);
            for p in 0..ch.m_t() {
                if tr.points.iter().any(|(kk, pp, _)| *kk == k && *pp == p) {
                    continue;
                }
                for q in 0..ch.m_r() {
                    err += (h[bin_index(k, 64)][(q, p)] - want[(q, p)]).norm_sqr();
                    pow += want[(q, p)].norm_sqr();
                }
            }
        }
        err / pow
    }

    #[test]
    fn flat_channel_stays_flat() {
        let map = SubcarrierMap::new(64).unwrap();
        let v = Complex64::new(0.3, -0.8);
        let ch = ChannelRealization::from_taps(64, vec![vec![vec![v], vec![v * 2.0]]]).unwrap();
        let tr = trained_from(&ch, 2, &map);
        let spline = interpolate_channel(&tr, &map);
        let iter = iterative_refine(&tr, &map, 1, 1, &Dft::new(64).unwrap()).unwrap();
        for &k in map.used() {
            for out in [&spline.h_pre, &iter.h_pre] {
                assert!((out[bin_index(k, 64)][(0, 0)] - v).norm() < 1e-12);
                assert!((out[bin_index(k, 64)][(0, 1)] - v * 2.0).norm() < 1e-12);
            }
        }
        assert!(spline.warnings.is_empty());
    }

    #[test]
    fn trained_bins_untouched() {
        let map = SubcarrierMap::new(64).unwrap();
        let ch = draw_channel(4, 2, 7, 2.0, 64, 16, &RandomSource::new(3)).unwrap();
        let tr = trained_from(&ch, 4, &map);
        let dft = Dft::new(64).unwrap();
        for out in [interpolate_channel(&tr, &map).h_pre, iterative_refine(&tr, &map, 7, 50, &dft).unwrap().h_pre] {
            for (k, p, col) in tr.points() {
                for (q, v) in col.iter().enumerate() {
                    assert_eq!(out[bin_index(*k, 64)][(q, *p)], *v);
                }
            }
            for &k in map.nulls() {
                assert!(out[bin_index(k, 64)].iter().all(|z| z.norm() == 0.0));
            }
        }
    }

    #[test]
    fn spline_tracks_smooth_channel() {
        let map = SubcarrierMap::new(64).unwrap();
        let ch = draw_channel(2, 2, 2, 2.0, 64, 16, &RandomSource::new(8)).unwrap();
        let tr = trained_from(&ch, 2, &map);
        let err = untrained_error(&interpolate_channel(&tr, &map).h_pre, &ch, &tr, &map);
        assert!(err < 5e-2, "{err}");
    }

    #[test]
    fn spline_reproduces_cubics() {
        let xs: Vec<f64> = vec![-5.0, -2.0, 0.0, 1.0, 4.0, 7.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let s = Spline::new(xs, ys);
        for t in [-4.0, -0.5, 3.3, 6.9, 9.0, -8.0] {
            assert!((s.eval(t) - (2.0 * t - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn few_knots_fall_back_to_linear() {
        let map = SubcarrierMap::new(64).unwrap();
        let points = vec![(-10, 0, vec![Complex64::new(1.0, 0.0)]), (10, 0, vec![Complex64::new(3.0, 0.0)])];
        let out = interpolate_channel(&TrainedChannel::new(64, 1, 1, points), &map);
        assert_eq!(out.warnings.len(), 1);
        assert!((out.h_pre[bin_index(1, 64)][(0, 0)] - 2.1).norm() < 1e-12);
    }

    #[test]
    fn refinement_beats_spline_for_four_antennas() {
        let map = SubcarrierMap::new(64).unwrap();
        let dft = Dft::new(64).unwrap();
        let root = RandomSource::new(77);
        let (mut spline, mut iter) = (0.0, 0.0);
        for i in 0..200 {
            let ch = draw_channel(4, 4, 7, 2.0, 64, 16, &root.child("ch", i)).unwrap();
            let tr = trained_from(&ch, 4, &map);
            spline += untrained_error(&interpolate_channel(&tr, &map).h_pre, &ch, &tr, &map);
            iter += untrained_error(&iterative_refine(&tr, &map, 7, 50, &dft).unwrap().h_pre, &ch, &tr, &map);
        }
        assert!(iter < spline, "iterative {iter} vs spline {spline}");
    }
}
