//! Seeded sample points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `count` points uniform in `[-half_width, half_width]^dim`.
pub fn random_points(dim: usize, half_width: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-half_width..=half_width)).collect())
        .collect()
}
