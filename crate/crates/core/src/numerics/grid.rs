use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Storage bin of logical subcarrier `k` in `-N/2..N/2` (wraps modulo `n`).
#[inline]
pub fn bin_index(k: i32, n: usize) -> usize {
    k.rem_euclid(n as i32) as usize
}

/// Logical subcarrier in `-N/2..N/2` for storage bin `bin`.
#[inline]
pub fn logical_index(bin: usize, n: usize) -> i32 {
    let half = n / 2;
    if bin >= half {
        bin as i32 - n as i32
    } else {
        bin as i32
    }
}

/// `n` subcarriers by `m` antennas, stored antenna-major so each antenna's
/// spectrum is a contiguous slice in FFT bin order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexGrid {
    n: usize,
    m: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            data: vec![Complex64::new(0.0, 0.0); n * m],
        }
    }

    /// Builds a grid from per-antenna columns; all columns must share a length.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Self {
        let n = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == n), "ragged grid columns");
        Self {
            n,
            m: columns.len(),
            data: columns.concat(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn column(&self, ant: usize) -> &[Complex64] {
        &self.data[ant * self.n..(ant + 1) * self.n]
    }

    pub fn column_mut(&mut self, ant: usize) -> &mut [Complex64] {
        &mut self.data[ant * self.n..(ant + 1) * self.n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks(self.n.max(1))
    }

    /// Value at logical subcarrier `k` for antenna `ant`.
    #[inline]
    pub fn at(&self, k: i32, ant: usize) -> Complex64 {
        self.data[ant * self.n + bin_index(k, self.n)]
    }

    #[inline]
    pub fn set(&mut self, k: i32, ant: usize, value: Complex64) {
        let idx = ant * self.n + bin_index(k, self.n);
        self.data[idx] = value;
    }

    /// All antennas' values at logical subcarrier `k`.
    pub fn row(&self, k: i32) -> Vec<Complex64> {
        (0..self.m).map(|a| self.at(k, a)).collect()
    }

    /// Conjugate mirror: `out(k) = conj(in(-k))` per antenna.
    pub fn conj_mirror(&self) -> Self {
        let mut out = Self::zeros(self.n, self.m);
        for a in 0..self.m {
            let src = self.column(a);
            let dst = out.column_mut(a);
            for (bin, d) in dst.iter_mut().enumerate() {
                *d = src[(self.n - bin) % self.n].conj();
            }
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            n: self.n,
            m: self.m,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// Largest elementwise difference magnitude.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.n, self.m), (other.n, other.m));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}
