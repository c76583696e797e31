use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

/// Seed tree for Monte-Carlo trials.
///
/// A source is a master seed plus a path of `(label, index)` steps. The
/// generator seed is a hash of the whole path, so a child's draws depend only
/// on where it sits in the tree, never on the order in which siblings run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomSource {
    master_seed: u64,
    path: Vec<(String, u64)>,
}

impl RandomSource {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[(String, u64)] {
        &self.path
    }

    pub fn child(&self, label: &str, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push((label.to_owned(), index));
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    fn seed(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"rfcomp-rng-v1");
        h.update(self.master_seed.to_le_bytes());
        for (label, index) in &self.path {
            h.update((label.len() as u64).to_le_bytes());
            h.update(label.as_bytes());
            h.update(index.to_le_bytes());
        }
        h.finalize().into()
    }

    /// Fresh generator positioned at the start of this node's stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed())
    }
}

/// Circular complex Gaussian with total variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}
