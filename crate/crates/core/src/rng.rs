//! Deterministic stream splitting: every trial (and every constraint within
//! a trial) gets its own counter-derived generator, so results do not depend
//! on worker count or scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent generator from a master seed and a stream index.
///
/// The 256-bit ChaCha key is filled from a splitmix64 walk keyed by both
/// inputs, so nearby (seed, index) pairs yield unrelated streams.
pub fn stream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut state = splitmix64(master_seed) ^ splitmix64(index.wrapping_mul(0xa076_1d64_78bd_642f));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stable identifier of the (seed, index) stream, for logs and audit.
pub fn stream_key(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed) ^ splitmix64(index.wrapping_mul(0xa076_1d64_78bd_642f))
}

/// Stream for constraint `j` inside trial `index`.
pub fn substream(master_seed: u64, index: u64, j: u64) -> ChaCha8Rng {
    stream(splitmix64(master_seed ^ splitmix64(j.wrapping_add(1))), index)
}
