use num_complex::Complex64;

use crate::error::{config_err, Result};

const SCALE: f64 = 0.316_227_766_016_837_94; // 1/sqrt(10)

/// Gray code per axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
fn level(b0: u8, b1: u8) -> f64 {
    match (b0, b1) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

fn bits_of(v: f64) -> (u8, u8) {
    let a = v / SCALE;
    if a < -2.0 {
        (0, 0)
    } else if a < 0.0 {
        (0, 1)
    } else if a < 2.0 {
        (1, 1)
    } else {
        (1, 0)
    }
}

/// Constellation size.
pub const QAM16_POINTS: usize = 16;

/// Maps bits (one per `u8`, 0 or 1) four at a time: `b0b1` select the
/// in-phase level, `b2b3` the quadrature level.
pub fn qam16_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 4 != 0 {
        return config_err(format!("16-QAM needs a multiple of 4 bits, got {}", bits.len()));
    }
    Ok(bits
        .chunks_exact(4)
        .map(|b| Complex64::new(level(b[0], b[1]) * SCALE, level(b[2], b[3]) * SCALE))
        .collect())
}

/// Nearest-neighbour demapping.
pub fn qam16_demap(symbols: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(symbols.len() * 4);
    for s in symbols {
        let (a, b) = bits_of(s.re);
        let (c, d) = bits_of(s.im);
        out.extend_from_slice(&[a, b, c, d]);
    }
    out
}

/// Nearest constellation point.
pub fn qam16_slice(s: Complex64) -> Complex64 {
    let bits = qam16_demap(&[s]);
    qam16_map(&bits).expect("four bits")[0]
}
