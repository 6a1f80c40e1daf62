//! Seeded random sources.
//!
//! Every stochastic operation takes an explicit generator. Runs that fan out
//! over subjects derive one generator per subject as `seed + index`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for the `index`-th subject of a run seeded with `seed`.
pub fn for_subject(seed: u64, index: usize) -> SeededRng {
    seeded(seed.wrapping_add(index as u64))
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}
