//! Per-trial random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Channel draw, identification sequence and probe.
pub const TAG_TRIAL: u64 = 0;
/// Inverse-learning training magnitudes.
pub const TAG_INVERSE: u64 = 1;
/// First SNR point; point `j` uses `TAG_POINT + j`.
pub const TAG_POINT: u64 = 16;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes the three inputs through chained splitmix64 rounds. Each stage is a
/// bijection of its running state, so two inputs that differ only in the
/// last word never collide.
pub fn derive_trial_seed(master_seed: u64, trial: u64, stream_tag: u64) -> u64 {
    let a = splitmix64(master_seed);
    let b = splitmix64(a ^ trial);
    splitmix64(b ^ stream_tag.rotate_left(32))
}

pub fn stream(master_seed: u64, trial: u64, stream_tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_trial_seed(master_seed, trial, stream_tag))
}
