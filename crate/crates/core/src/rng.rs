//! Seed derivation. Every stochastic step draws from a ChaCha8 stream seeded
//! with a value derived here, so results depend only on the global seed and
//! the position of the sample in the run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const EPOCH_ROTATION: u32 = 39;
const INDEX_ROTATION: u32 = 7;

/// The SplitMix64 output function applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-sample seed: `splitmix64(global ^ rotl(epoch, 39) ^ rotl(index, 7))`.
///
/// The two rotations place `index < 2^32` and `epoch < 2^25` in disjoint bit
/// ranges, and SplitMix64 is a bijection, so seeds never collide within a run
/// of that size.
pub fn derive_seed(global_seed: u64, epoch: u64, index: u64) -> u64 {
    splitmix64(
        global_seed ^ epoch.rotate_left(EPOCH_ROTATION) ^ index.rotate_left(INDEX_ROTATION),
    )
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One standard normal draw by Box-Muller, using libm so the value does not
/// depend on which std math backend is linked.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}
