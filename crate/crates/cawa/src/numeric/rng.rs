//! Deterministic seed derivation. All randomness in a run flows from one
//! root seed, split per subsystem and per use with a tagged hash.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives a child seed from a root seed and a tag (FNV-1a over the tag,
/// mixed with splitmix64). Stable across platforms and runs.
pub fn derive_seed(root: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in tag.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    splitmix64(root ^ h)
}

/// Child seed indexed by counters (epoch, document, ...).
pub fn derive_seed_indexed(root: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut s = derive_seed(root, tag);
    for &i in indices {
        s = splitmix64(s ^ i);
    }
    s
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_tag_sensitive() {
        assert_eq!(derive_seed(42, "init"), derive_seed(42, "init"));
        assert_ne!(derive_seed(42, "init"), derive_seed(42, "shuffle"));
        assert_ne!(derive_seed(42, "init"), derive_seed(43, "init"));
        assert_ne!(
            derive_seed_indexed(42, "dropout", &[1, 2]),
            derive_seed_indexed(42, "dropout", &[2, 1])
        );
    }
}
