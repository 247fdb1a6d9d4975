//! Seeding. Every random stream in a run derives from one 64-bit seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `r` under base seed `base`: `mix64(base ^ r)`.
pub fn run_seed(base: u64, run: u64) -> u64 {
    mix64(base ^ run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn run_seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..100).map(|r| run_seed(42, r)).collect();
        let mut sorted = seeds.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(run_seed(42, 7), run_seed(42, 7));
    }

    #[test]
    fn seeded_streams_replay() {
        let a: Vec<u32> = seeded(3).random_iter().take(5).collect();
        let b: Vec<u32> = seeded(3).random_iter().take(5).collect();
        assert_eq!(a, b);
    }
}
