//! Deterministic seed derivation.
//!
//! Every randomized operation owns a ChaCha stream derived from an explicit
//! base seed plus a list of stream identifiers (subject index, fold index,
//! feature column, ...). Derived streams make results independent of
//! scheduling and of the order in which work units run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the splitmix64 output function.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a base seed with stream identifiers into a new 64-bit seed.
pub fn mix(seed: u64, parts: &[u64]) -> u64 {
    let mut acc = splitmix64(seed);
    for &p in parts {
        acc = splitmix64(acc ^ splitmix64(p.wrapping_add(0xa076_1d64_78bd_642f)));
    }
    acc
}

/// Stable 64-bit FNV-1a hash for string identifiers.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// A ChaCha stream for the given seed and stream identifiers.
pub fn stream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, parts))
}
