//! Deterministic seed derivation.
//!
//! Every independent unit of work (trial, scenario, repeat) gets its own
//! ChaCha stream keyed by the master seed, so results do not depend on the
//! order in which units execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for work unit `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mixes a label into a seed (splitmix64 finaliser), used to separate
/// unrelated random streams that share a master seed.
pub fn derive(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
