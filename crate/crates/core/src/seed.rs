//! Deterministic seed derivation.
//!
//! Every randomized step (k-medoids restarts, per-node bisections, LOOCV
//! folds) gets its own seed derived from a master seed and a path of
//! integers. The mixer is SplitMix64, which is stable across platforms and
//! releases, unlike `std::collections::hash_map::DefaultHasher`.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and an ordered path of indices.
///
/// `derive_seed(s, &[a, b])` differs from `derive_seed(s, &[b, a])`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}
