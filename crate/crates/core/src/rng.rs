//! Deterministic RNG streams.
//!
//! Every randomized routine in this crate draws from a ChaCha stream derived
//! from a master seed plus a list of integer tags (population size, trial
//! index, hashed probe id, ...). Streams for distinct tag lists are
//! independent, so work items can run in any order, or in parallel, and still
//! produce bit-identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; a well-mixed 64-bit permutation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(master: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master ^ 0x6a09_e667_f3bc_c908);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t));
    }
    state
}

/// Derive an independent ChaCha8 stream from `master` and `tags`.
pub fn derive_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = mix(master, tags);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Derive a child seed, for APIs that take a `u64` seed of their own.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    mix(master, tags)
}

/// Stable 64-bit hash of a string (FNV-1a), used to tag streams by id.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in s.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
