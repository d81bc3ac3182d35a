//! Seeded randomness.
//!
//! Every random draw in the crate comes from a ChaCha8 generator (a
//! counter-based stream cipher PRNG) keyed by a 64-bit seed and selected
//! by a 64-bit stream id. Per-round and per-worker seeds are derived with
//! [`derive_seed`], so a worker's draws never depend on which thread ran
//! it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream ids used by the crate. Tests that re-derive draws rely on these.
pub mod streams {
    pub const SKETCH: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const SYNTH: u64 = 3;
    pub const FOURIER: u64 = 4;
    /// Class `c` of a label-skew partition uses `LABEL_SKEW + c`.
    pub const LABEL_SKEW: u64 = 1 << 32;
}

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `base` with SplitMix64. Order-sensitive.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
