//! Deterministic seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a parent seed and a salt.
pub fn derive(seed: u64, salt: u64) -> u64 {
    mix64(seed ^ mix64(salt))
}

/// Seed for worker `index`; `step_salt` separates the autoencoder and
/// classifier populations of one run.
pub fn worker_seed(master: u64, step_salt: u64, index: u32) -> u64 {
    derive(derive(master, step_salt), u64::from(index) + 1)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
