//! Derived-seed helpers for reproducible substreams.
//!
//! Every randomized path in this crate (per-record uniforms for randomized
//! survival probabilities, per-replicate simulation seeds) derives its seed
//! from a user-supplied master seed plus structural indices, so any single
//! record or replicate can be regenerated in isolation and results do not
//! depend on execution order.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a list of structural indices.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    let mut state = mix(seed ^ 0x6A09_E667_F3BC_C909);
    for &p in parts {
        state = mix(state ^ p.wrapping_mul(0xD134_2543_DE82_EF95).wrapping_add(1));
    }
    state
}

/// A single uniform draw on the open interval (0, 1) from a derived seed.
pub fn unit_uniform(seed: u64) -> f64 {
    ((mix(seed) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
