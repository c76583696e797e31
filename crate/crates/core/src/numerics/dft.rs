use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{config_err, Result};

/// Planned forward/inverse transform pair of a fixed power-of-two size.
///
/// The forward transform is unnormalized, `X(k) = sum_n x(n) e^{-j2pi kn/N}`,
/// so that a tap vector transforms straight into its frequency response. The
/// inverse carries the `1/N`.
#[derive(Clone)]
pub struct Dft {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return config_err(format!("FFT size must be a power of two >= 2, got {n}"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return config_err(format!("transform length {len} does not match FFT size {}", self.n));
        }
        Ok(())
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) -> Result<()> {
        self.check(buf.len())?;
        self.fwd.process(buf);
        Ok(())
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64]) -> Result<()> {
        self.check(buf.len())?;
        self.inv.process(buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
        Ok(())
    }

    pub fn forward(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = v.to_vec();
        self.forward_in_place(&mut out)?;
        Ok(out)
    }

    pub fn inverse(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = v.to_vec();
        self.inverse_in_place(&mut out)?;
        Ok(out)
    }
}

/// One-shot forward transform sized by the input.
pub fn dft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    Dft::new(v.len())?.forward(v)
}

/// One-shot inverse transform sized by the input.
pub fn idft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    Dft::new(v.len())?.inverse(v)
}
