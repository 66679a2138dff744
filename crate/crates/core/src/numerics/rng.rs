//! Seeded randomness helpers. ChaCha20 keeps every stream reproducible across
//! platforms; normal deviates come from Box-Muller so no extra dependency is
//! needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// One standard-normal deviate; consumes exactly two uniforms per call so the
/// stream position is call-count deterministic.
pub fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn fill_normal(rng: &mut ChaCha20Rng, out: &mut [f64], std: f64) {
    for v in out.iter_mut() {
        *v = standard_normal(rng) * std;
    }
}
