//! Stable seed derivation. Every random stream in an experiment is keyed by
//! the top-level seed plus a path of labels, so results do not depend on the
//! order in which jobs run.

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a; fixed across platforms and releases, unlike `DefaultHasher`.
pub fn hash_name(name: &str) -> u64 {
    name.bytes()
        .fold(0xCBF2_9CE4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3))
}

pub fn derive_seed(top: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(top), |h, &p| mix64(h ^ mix64(p)))
}

/// Seed for job `index` of the stream called `name`.
pub fn named_seed(top: u64, name: &str, index: u64) -> u64 {
    derive_seed(top, &[hash_name(name), index])
}
