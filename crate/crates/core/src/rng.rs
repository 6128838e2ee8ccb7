//! Keyed random streams.
//!
//! Every random quantity in the crate is drawn from a stream identified by a
//! short path of integers (master seed, cell, replication, individual, ...).
//! A stream depends only on its key, so results do not depend on the number
//! of worker threads or on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags that keep streams for different purposes disjoint.
pub mod domain {
    pub const INDIVIDUAL: u64 = 0x1d1d;
    pub const BOOTSTRAP: u64 = 0xb007;
    pub const REPLICATION: u64 = 0x4e91;
    pub const ORACLE: u64 = 0x0c1e;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a key path into a single 64-bit stream identifier.
pub fn derive_key(path: &[u64]) -> u64 {
    let mut state = 0x5851_f42d_4c95_7f2d_u64;
    let mut acc = splitmix64(&mut state);
    for &word in path {
        state ^= word;
        acc = acc.rotate_left(17) ^ splitmix64(&mut state);
    }
    acc
}

/// Opens the stream for a key path.
pub fn stream(path: &[u64]) -> StreamRng {
    let mut state = derive_key(path);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
