//! Seeded generator shared by sampling and the synthetic corpora.
//!
//! xoshiro256++ seeded through SplitMix64 (the reference `seed_from_u64`
//! construction). Bounded integers use rejection sampling on full 64-bit
//! draws: with `zone = 2^64 - (2^64 mod m)`, draws `x >= zone` are discarded
//! and `x mod m` is returned. Both choices are fixed so results reproduce
//! across implementations.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub struct SeededRng(Xoshiro256PlusPlus);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `0..m`, `m > 0`.
    pub fn below(&mut self, m: usize) -> usize {
        let m = m as u64;
        let zone = u64::MAX - (u64::MAX - m + 1) % m;
        loop {
            let x = self.0.next_u64();
            if x <= zone {
                return (x % m) as usize;
            }
        }
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }
}
