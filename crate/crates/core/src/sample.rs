//! Seeded random sampling shared by the verifiers and the instance generator.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere a seed is accepted.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-scale, scale]`.
pub fn uniform_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.gen_range(-scale..=scale))
}

pub fn uniform_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..=scale))
}

/// A vector on a random scale spanning several orders of magnitude, with
/// occasional exact zeros. Exercises the zero branches of the duality map.
pub fn rough_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
    DVector::from_fn(dim, |_, _| {
        if rng.gen_bool(0.1) {
            0.0
        } else {
            rng.gen_range(-scale..=scale)
        }
    })
}
