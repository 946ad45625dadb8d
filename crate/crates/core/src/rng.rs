//! Seed derivation and per-component random substreams.
//!
//! Every random component of a realization (each weight matrix, each bias
//! vector) draws from its own ChaCha20 stream: the 256-bit key is expanded
//! from the 64-bit master seed, and the 64-bit stream id is the FNV-1a hash
//! of the component label (`"U"`, `"U:f"`, `"b:o"`, ...). Adding a component
//! or changing the length of one never shifts the samples of another.
//!
//! Gaussian variates use the ziggurat sampler of `rand_distr` 0.4
//! (`StandardNormal`), pinned through the workspace manifest.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type SubstreamRng = ChaCha20Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child (replica, grid cell, restart) of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index ^ 0x5851_f42d_4c95_7f2d))
}

/// Independent stream for the component named `label` under `seed`.
pub fn substream(seed: u64, label: &str) -> SubstreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a64(label));
    rng
}
