use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;

use super::SubcarrierMap;
use crate::numerics::{bin_index, ComplexGrid, RandomSource};

/// Seed of the fixed training sequence.
pub const PREAMBLE_SEED: u64 = 0x5052_4541_4d42_4c45;
/// Seed of the fixed short-symbol sequence.
pub const SHORT_SEED: u64 = 0x5348_4f52_5453_594d;

fn qpsk<R: Rng>(rng: &mut R) -> Complex64 {
    let re = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    Complex64::new(re, im)
}

/// The two long training symbols.
///
/// Used bins are dealt round-robin to the transmit antennas in ascending
/// order, so adjacent used bins (across the DC gap too) belong to consecutive
/// antennas. The second symbol repeats the first with the positive-frequency
/// half negated. The training values are constant-modulus QPSK with
/// `gamma(-k) = conj(gamma(k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleSet {
    t1: ComplexGrid,
    t2: ComplexGrid,
    gamma: Vec<Complex64>,
    owner: Vec<Option<usize>>,
}

pub fn build_preamble(m_t: usize, map: &SubcarrierMap, seed: u64) -> PreambleSet {
    assert!(m_t >= 1, "need at least one transmit antenna");
    let n = map.n();
    let mut rng = RandomSource::new(seed).child("gamma", 0).rng();
    let mut gamma = vec![Complex64::new(0.0, 0.0); n];
    for &k in map.used().iter().filter(|&&k| k > 0) {
        let g = qpsk(&mut rng);
        gamma[bin_index(k, n)] = g;
        gamma[bin_index(-k, n)] = g.conj();
    }
    let mut owner = vec![None; n];
    let mut t1 = ComplexGrid::zeros(n, m_t);
    let mut t2 = ComplexGrid::zeros(n, m_t);
    for (i, &k) in map.used().iter().enumerate() {
        let p = i % m_t;
        let g = gamma[bin_index(k, n)];
        owner[bin_index(k, n)] = Some(p);
        t1.set(k, p, g);
        t2.set(k, p, if k > 0 { -g } else { g });
    }
    PreambleSet { t1, t2, gamma, owner }
}

impl PreambleSet {
    pub fn t1(&self) -> &ComplexGrid {
        &self.t1
    }

    pub fn t2(&self) -> &ComplexGrid {
        &self.t2
    }

    pub fn gamma(&self, k: i32) -> Complex64 {
        self.gamma[bin_index(k, self.gamma.len())]
    }

    /// Transmit antenna trained on bin `k`, if any.
    pub fn owner(&self, k: i32) -> Option<usize> {
        self.owner[bin_index(k, self.owner.len())]
    }

    /// Nonzero entry of row `k` of the first training matrix (zero on nulls).
    pub fn lambda1(&self, k: i32) -> Complex64 {
        self.owner(k).map_or(Complex64::new(0.0, 0.0), |p| self.t1.at(k, p))
    }

    pub fn lambda2(&self, k: i32) -> Complex64 {
        self.owner(k).map_or(Complex64::new(0.0, 0.0), |p| self.t2.at(k, p))
    }

    pub fn m_t(&self) -> usize {
        self.t1.m()
    }
}

/// Short training symbol: unit-modulus values on used bins, zero on nulls,
/// antenna `p` rotated by `exp(j 2pi p / m_t)`.
pub fn build_short_symbol(map: &SubcarrierMap, m_t: usize, seed: u64) -> ComplexGrid {
    let n = map.n();
    let mut rng = RandomSource::new(seed).child("short", 0).rng();
    let base: Vec<(i32, Complex64)> = map.used().iter().map(|&k| (k, qpsk(&mut rng))).collect();
    let mut grid = ComplexGrid::zeros(n, m_t);
    for p in 0..m_t {
        let rot = Complex64::from_polar(1.0, 2.0 * PI * p as f64 / m_t as f64);
        for &(k, v) in &base {
            grid.set(k, p, v * rot);
        }
    }
    grid
}
