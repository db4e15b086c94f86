//! Seed derivation for common-knowledge randomness.
//!
//! Every agent has to derive the same random numbers from the same public
//! inputs, on any machine. Nothing here may depend on `std`'s randomized
//! hashers or on platform word size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
#[inline]
pub const fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines two words into a new seed. Not commutative.
#[inline]
pub const fn mix(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b.rotate_left(29) ^ 0x2545_f491_4f6c_dd1d)
}

/// Hashes a seed together with a sequence of small words (e.g. an encoded
/// private observation).
pub fn hash_words(seed: u64, words: &[u16]) -> u64 {
    let mut h = mix(seed, words.len() as u64);
    for chunk in words.chunks(4) {
        let mut packed = 0u64;
        for (i, w) in chunk.iter().enumerate() {
            packed |= u64::from(*w) << (16 * i);
        }
        h = mix(h, packed);
    }
    h
}

/// Maps a hash to a uniform float in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed for timestep `t` of an episode: `ξ_t = hash(episode_seed, t)`.
#[inline]
pub const fn timestep_seed(episode_seed: u64, t: usize) -> u64 {
    mix(episode_seed, t as u64)
}

/// Deterministic generator for everything that is not keyed per observation.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Domain-separation tags so that streams derived from the same seed for
/// different purposes never coincide.
pub mod stream {
    pub const DEAL: u64 = 0x6465_616c;
    pub const SAMPLES: u64 = 0x7361_6d70;
    pub const POLICY: u64 = 0x706f_6c69;
    pub const INIT: u64 = 0x696e_6974;
    pub const EPISODE: u64 = 0x6570_6973;
    pub const PBT: u64 = 0x7062_7400;
    pub const EVAL: u64 = 0x6576_616c;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashing_is_stable() {
        // Frozen values: a change here breaks cross-version reproducibility.
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(hash_words(7, &[1, 2, 3]), hash_words(7, &[1, 2, 3]));
        assert_ne!(hash_words(7, &[1, 2, 3]), hash_words(7, &[3, 2, 1]));
        assert_ne!(hash_words(7, &[1, 2]), hash_words(7, &[1, 2, 0]));
    }

    #[test]
    fn unit_interval() {
        for i in 0..1000u64 {
            let u = unit_f64(splitmix64(i));
            assert!((0.0..1.0).contains(&u));
        }
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }

    #[test]
    fn timestep_seeds_differ() {
        let a: Vec<u64> = (0..65).map(|t| timestep_seed(11, t)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
    }
}
