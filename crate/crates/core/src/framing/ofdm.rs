use num_complex::Complex64;

use crate::error::{config_err, Result};
use crate::numerics::{ComplexGrid, Dft};

/// Inverse transform each antenna's spectrum and prepend the last `n_cp`
/// samples. Returns one `N + n_cp` stream per antenna.
pub fn ofdm_modulate(grid: &ComplexGrid, n_cp: usize, dft: &Dft) -> Result<Vec<Vec<Complex64>>> {
    if n_cp > grid.n() {
        return config_err("cyclic prefix longer than the symbol");
    }
    grid.columns()
        .map(|col| {
            let body = dft.inverse(col)?;
            let mut out = Vec::with_capacity(body.len() + n_cp);
            out.extend_from_slice(&body[body.len() - n_cp..]);
            out.extend_from_slice(&body);
            Ok(out)
        })
        .collect()
}

/// Strip the prefix from each stream (which must start at a symbol boundary)
/// and transform the following `N` samples.
pub fn ofdm_demodulate<S: AsRef<[Complex64]>>(streams: &[S], n_cp: usize, dft: &Dft) -> Result<ComplexGrid> {
    let n = dft.len();
    let cols = streams
        .iter()
        .map(|s| {
            let s = s.as_ref();
            if s.len() < n + n_cp {
                return config_err(format!("stream of {} samples is shorter than one symbol ({})", s.len(), n + n_cp));
            }
            dft.forward(&s[n_cp..n_cp + n])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComplexGrid::from_columns(&cols))
}

/// Concatenated CP-OFDM streams for a run of symbols.
pub fn ofdm_modulate_frame(symbols: &[ComplexGrid], n_cp: usize, dft: &Dft) -> Result<Vec<Vec<Complex64>>> {
    let m = symbols.first().map_or(0, ComplexGrid::m);
    let mut out = vec![Vec::with_capacity(symbols.len() * (dft.len() + n_cp)); m];
    for sym in symbols {
        for (stream, chunk) in out.iter_mut().zip(ofdm_modulate(sym, n_cp, dft)?) {
            stream.extend(chunk);
        }
    }
    Ok(out)
}

/// Inverse of [`ofdm_modulate_frame`]; trailing samples (channel tail) are ignored.
pub fn ofdm_demodulate_frame<S: AsRef<[Complex64]>>(
    streams: &[S],
    n_symbols: usize,
    n_cp: usize,
    dft: &Dft,
) -> Result<Vec<ComplexGrid>> {
    let len = dft.len() + n_cp;
    (0..n_symbols)
        .map(|i| {
            let slices: Vec<&[Complex64]> = streams
                .iter()
                .map(|s| s.as_ref().get(i * len..(i + 1) * len).unwrap_or(&[]))
                .collect();
            ofdm_demodulate(&slices, n_cp, dft)
        })
        .collect()
}
