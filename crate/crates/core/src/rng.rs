//! Deterministic per-sample RNG streams.
//!
//! Every generated sample owns an independent ChaCha12 stream keyed by
//! (master seed, violation id, regime id, level, index). Replay is therefore
//! byte-identical regardless of worker count or iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(h0: u64, bytes: &[u8]) -> u64 {
    let mut h = h0;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// 32-byte seed from labelled parts. Parts are length-prefixed so
/// ("ab","c") and ("a","bc") produce different seeds.
pub fn derive_seed(master: u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut seed = [0u8; 32];
    for (word, chunk) in seed.chunks_exact_mut(8).enumerate() {
        let salt = (word as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut h = fnv1a(FNV_OFFSET ^ salt, &master.to_le_bytes());
        for part in parts {
            h = fnv1a(h, &(part.len() as u64).to_le_bytes());
            h = fnv1a(h, part);
        }
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    seed
}

/// Stream for an arbitrary labelled purpose.
pub fn stream(master: u64, parts: &[&[u8]]) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(derive_seed(master, parts))
}

/// Stream owning one generated sample.
pub fn sample_stream(
    master: u64,
    violation: &str,
    regime: &str,
    level: u8,
    index: u32,
) -> ChaCha12Rng {
    stream(
        master,
        &[
            b"sample",
            violation.as_bytes(),
            regime.as_bytes(),
            &[level],
            &index.to_le_bytes(),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible() {
        let mut a = sample_stream(7, "obs_add", "d5l3t250pl0.075pi0", 3, 42);
        let mut b = sample_stream(7, "obs_add", "d5l3t250pl0.075pi0", 3, 42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ_across_keys() {
        let base = sample_stream(7, "obs_add", "r", 3, 42).next_u64();
        assert_ne!(base, sample_stream(8, "obs_add", "r", 3, 42).next_u64());
        assert_ne!(base, sample_stream(7, "obs_mul", "r", 3, 42).next_u64());
        assert_ne!(base, sample_stream(7, "obs_add", "r2", 3, 42).next_u64());
        assert_ne!(base, sample_stream(7, "obs_add", "r", 4, 42).next_u64());
        assert_ne!(base, sample_stream(7, "obs_add", "r", 3, 43).next_u64());
    }

    #[test]
    fn length_prefix_prevents_concatenation_collisions() {
        let a = derive_seed(0, &[b"ab", b"c"]);
        let b = derive_seed(0, &[b"a", b"bc"]);
        assert_ne!(a, b);
    }
}
