//! Seeded Gaussian sampling on ChaCha8 streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Matrix, Vector};

/// Deterministic standard-normal generator.
#[derive(Debug, Clone)]
pub struct NormalRng {
    rng: ChaCha8Rng,
}

impl NormalRng {
    pub fn new(seed: u64) -> Self {
        NormalRng {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for `(seed, stream)`, e.g. one per trial.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NormalRng { rng }
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.normal())
    }

    pub fn vector(&mut self, len: usize) -> Vector {
        Vector::from_vec((0..len).map(|_| self.normal()).collect())
    }
}
