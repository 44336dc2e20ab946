//! Seeded randomness. Every random draw in the crate goes through
//! [`seeded`], a ChaCha8 stream generator: its output is fully specified by
//! the algorithm and the 64-bit seed, so runs reproduce across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::{Matrix, Vector};

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vector(rng: &mut SimRng, len: usize) -> Vector {
    Vector::from_vec((0..len).map(|_| rng.sample(StandardNormal)).collect())
}

pub fn normal_matrix(rng: &mut SimRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}
