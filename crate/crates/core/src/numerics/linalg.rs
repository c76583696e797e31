use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Solves refusing anything worse conditioned than this (1-norm estimate).
pub const MAX_CONDITION: f64 = 1e12;

fn norm1(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Gauss-Jordan inverse with partial pivoting. `None` on an exactly zero pivot.
fn invert(a: &CMatrix) -> Option<CMatrix> {
    let n = a.nrows();
    let mut work = a.clone();
    let mut inv = CMatrix::identity(n, n);
    for col in 0..n {
        let (pivot, mag) = (col..n)
            .map(|r| (r, work[(r, col)].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag == 0.0 || !mag.is_finite() {
            return None;
        }
        work.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let p = work[(col, col)].inv();
        for j in 0..n {
            work[(col, j)] *= p;
            inv[(col, j)] *= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work[(r, col)];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                let wv = work[(col, j)];
                let iv = inv[(col, j)];
                work[(r, j)] -= f * wv;
                inv[(r, j)] -= f * iv;
            }
        }
    }
    Some(inv)
}

/// Returns `(A + lambda I)^-1 B`.
///
/// Fails with [`Error::Singular`] naming `site` when the regularized matrix is
/// singular or its 1-norm condition number exceeds [`MAX_CONDITION`].
pub fn solve_regularized(a: &CMatrix, lambda: f64, b: &CMatrix, site: &'static str) -> Result<CMatrix> {
    assert!(a.is_square(), "solve_regularized: A must be square");
    assert_eq!(a.nrows(), b.nrows(), "solve_regularized: dimension mismatch");
    assert!(lambda >= 0.0, "solve_regularized: negative regularizer");
    let n = a.nrows();
    let mut reg = a.clone();
    for i in 0..n {
        reg[(i, i)] += lambda;
    }
    let inv = invert(&reg).ok_or(Error::Singular {
        site,
        cond: f64::INFINITY,
    })?;
    let cond = norm1(&reg) * norm1(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::Singular { site, cond });
    }
    Ok(inv * b)
}

/// `diag(d) * A`.
pub fn diag_mul(d: &[Complex64], a: &CMatrix) -> CMatrix {
    let mut out = a.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= d[i];
    }
    out
}

/// Elementwise conjugate (the per-bin half of the conjugate-mirror operation).
pub fn mirror_conj_matrix(a: &CMatrix) -> CMatrix {
    a.map(|z| z.conj())
}
