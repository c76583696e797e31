use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::framing::SubcarrierMap;
use crate::numerics::{CMatrix, ComplexGrid};

/// Receive vectors on every null bin of the given symbols.
pub fn null_bin_samples(symbols: &[ComplexGrid], map: &SubcarrierMap) -> Vec<Vec<Complex64>> {
    symbols
        .iter()
        .flat_map(|g| map.nulls().iter().map(move |&k| g.row(k)))
        .collect()
}

/// Sample correlation `(1 / L N_null) sum x x^H` over null-bin receive vectors.
pub fn estimate_noise_ici_corr(samples: &[Vec<Complex64>]) -> Result<CMatrix> {
    let m = samples.first().map(Vec::len).unwrap_or(0);
    if samples.is_empty() || m == 0 {
        return Err(Error::Estimation("no null-bin samples for the noise correlation".into()));
    }
    let mut psi = CMatrix::zeros(m, m);
    for x in samples {
        assert_eq!(x.len(), m, "inconsistent receive vector length");
        for i in 0..m {
            for j in 0..m {
                psi[(i, j)] += x[i] * x[j].conj();
            }
        }
    }
    Ok(psi / Complex64::new(samples.len() as f64, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{complex_gaussian, RandomSource};

    #[test]
    fn zeros_and_single_sample() {
        let z = estimate_noise_ici_corr(&vec![vec![Complex64::new(0.0, 0.0); 3]; 5]).unwrap();
        assert_eq!(z, CMatrix::zeros(3, 3));
        let x = vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)];
        let psi = estimate_noise_ici_corr(std::slice::from_ref(&x)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(psi[(i, j)], x[i] * x[j].conj());
            }
        }
        // rank one: determinant vanishes
        let det = psi[(0, 0)] * psi[(1, 1)] - psi[(0, 1)] * psi[(1, 0)];
        assert!(det.norm() < 1e-12);
        assert!(estimate_noise_ici_corr(&[]).is_err());
    }

    #[test]
    fn hermitian_psd_and_consistent() {
        let mut rng = RandomSource::new(1).rng();
        let samples: Vec<Vec<Complex64>> = (0..600).map(|_| (0..2).map(|_| complex_gaussian(&mut rng, 1.0)).collect()).collect();
        let psi = estimate_noise_ici_corr(&samples).unwrap();
        assert!((&psi - psi.adjoint()).norm() < 1e-14);
        // 2x2 Hermitian: PSD iff diagonal and determinant are nonnegative
        let det = (psi[(0, 0)] * psi[(1, 1)] - psi[(0, 1)] * psi[(1, 0)]).re;
        assert!(psi[(0, 0)].re >= 0.0 && psi[(1, 1)].re >= 0.0 && det >= 0.0);
        let err = (psi - CMatrix::identity(2, 2)).norm() / 2f64.sqrt();
        assert!(err < 0.15, "{err}");
    }

    #[test]
    fn unbiased_over_many_samples() {
        let mut rng = RandomSource::new(2).rng();
        let cov = [[0.3, 0.1], [0.1, 0.2]];
        // x = A w with A A^H = cov (real Cholesky)
        let a11 = f64::sqrt(cov[0][0]);
        let a21 = cov[1][0] / a11;
        let a22 = (cov[1][1] - a21 * a21).sqrt();
        let samples: Vec<Vec<Complex64>> = (0..100_000)
            .map(|_| {
                let (w1, w2) = (complex_gaussian(&mut rng, 1.0), complex_gaussian(&mut rng, 1.0));
                vec![w1 * a11, w1 * a21 + w2 * a22]
            })
            .collect();
        let psi = estimate_noise_ici_corr(&samples).unwrap();
        for i in 0..2 {
            assert!((psi[(i, i)].re - cov[i][i]).abs() < 0.02 * cov[i][i]);
        }
        assert!((psi[(0, 1)].re - 0.1).abs() < 0.02 * 0.3);
    }
}
