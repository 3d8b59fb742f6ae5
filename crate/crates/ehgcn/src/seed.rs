//! Deterministic seed fan-out.
//!
//! One user-facing seed expands into independent sub-seeds, one per
//! randomized stage: a domain tag is folded in with FNV-1a, the index is
//! added, and the result is finalized with SplitMix64. The scheme is fixed
//! so identical inputs always reproduce identical streams.

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives the sub-seed for `(domain, index)` under a base seed.
pub fn derive(base: u64, domain: &str, index: u64) -> u64 {
    let tagged = base ^ fnv1a(domain.as_bytes());
    splitmix64(splitmix64(tagged).wrapping_add(index))
}
