//! Counter-based per-shot random streams.
//!
//! Shot `k` of a run seeded with `master` always draws from ChaCha8 stream
//! `k` of key `master`, independent of how shots are scheduled on workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ShotRng = ChaCha8Rng;

pub fn shot_rng(master_seed: u64, shot_index: u64) -> ShotRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(shot_index);
    rng
}

/// Mixes a scenario-level tag (e.g. a time-point index) into a master seed
/// so that independent series draw from unrelated keys.
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master_seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
