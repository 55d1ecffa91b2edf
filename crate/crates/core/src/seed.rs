//! Deterministic seed derivation.
//!
//! Every random stream in the pipeline (bootstrap subset i, group g, batch b,
//! score generation) is keyed by a child seed derived from the master seed and
//! a list of stream labels. Results are therefore independent of evaluation
//! order and thread count, and any single stream can be re-derived in
//! isolation.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn step(state: u64) -> u64 {
    mix(state.wrapping_add(GOLDEN))
}

/// Derive the seed of the stream identified by `words` under `master`.
///
/// Derivation is compositional: deriving `[a, b]` in one call equals deriving
/// `[a]` and then `[b]` from the intermediate seed.
pub fn child_seed(master: u64, words: &[u64]) -> u64 {
    let mut s = master;
    for &w in words {
        s = step(s ^ w);
    }
    s
}

/// Stable 64-bit label for a string stream name (FNV-1a).
pub fn label_seed(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
