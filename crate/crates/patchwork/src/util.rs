//! Deterministic hashing and seed derivation helpers.

/// FNV-1a over a byte slice. Used for parameter fingerprints and the
/// codebook version tag stored next to a trained prior.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// splitmix64 step; mixes a base seed with a stream index so each training
/// stage gets an independent, reproducible RNG stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Hash an f64 buffer bit-exactly (little-endian payload).
pub fn hash_f64s(h: &mut u64, values: &[f64]) {
    for v in values {
        for b in v.to_le_bytes() {
            *h ^= b as u64;
            *h = h.wrapping_mul(0x100000001b3);
        }
    }
}
