use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

/// The crate-wide deterministic generator.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Glorot-uniform initialization: entries uniform in `±sqrt(6 / (rows + cols))`.
pub fn xavier_init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    assert!(rows >= 1 && cols >= 1, "xavier_init needs a non-empty shape");
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}
