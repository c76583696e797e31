use num_complex::Complex64;

use crate::numerics::{bin_index, CMatrix};

/// Normalized channel-estimation error over the given bins:
/// `sum ||H_hat(k) - H(k)||_F^2 / sum ||H(k)||_F^2`.
pub fn compute_mse_ce(h_hat: &[CMatrix], h_true: &[CMatrix], bins: &[i32]) -> f64 {
    assert_eq!(h_hat.len(), h_true.len());
    let n = h_true.len();
    let (mut err, mut pow) = (0.0, 0.0);
    for &k in bins {
        let b = bin_index(k, n);
        err += (&h_hat[b] - &h_true[b]).norm_squared();
        pow += h_true[b].norm_squared();
    }
    if pow == 0.0 {
        return if err == 0.0 { 0.0 } else { f64::INFINITY };
    }
    err / pow
}

/// `||K1_hat - K1||_F^2` for diagonal matrices given by their diagonals.
pub fn compute_mse_k1(k1_hat: &[Complex64], k1_true: &[Complex64]) -> f64 {
    assert_eq!(k1_hat.len(), k1_true.len());
    k1_hat.iter().zip(k1_true).map(|(a, b)| (a - b).norm_sqr()).sum()
}
