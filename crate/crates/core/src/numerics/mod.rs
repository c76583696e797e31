//! Complex-vector primitives shared by every stage of the link: the DFT pair,
//! the frequency-domain grid and its conjugate mirror, small dense solves and
//! the seed-derivation scheme that keeps Monte-Carlo runs reproducible.

mod dft;
mod grid;
mod linalg;
pub mod matrix_serde;
mod rng;

pub use dft::{dft, idft, Dft};
pub use grid::{bin_index, logical_index, ComplexGrid};
pub use linalg::{diag_mul, mirror_conj_matrix, solve_regularized, CMatrix, MAX_CONDITION};
pub use rng::{complex_gaussian, RandomSource};

pub use num_complex::Complex64;
