//! Deterministic RNG stream derivation.
//!
//! Every stochastic engine derives its streams from the single run seed via
//! `stream_rng(seed, name, index)`: the ChaCha12 key is a SplitMix64 chain
//! over `(seed, fnv1a(name), index)`. Distinct (name, index) pairs give
//! independent streams, so parallel trajectory execution cannot change
//! results.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in name.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derive the RNG stream `(name, index)` from the run seed.
pub fn stream_rng(seed: u64, name: &str, index: u64) -> ChaCha12Rng {
    let mut state = seed ^ fnv1a(name);
    state ^= splitmix64(&mut state).wrapping_add(index);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
