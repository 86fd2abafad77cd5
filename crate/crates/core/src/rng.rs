//! Seeded randomness shared by every stochastic step.
//!
//! All randomness flows from ChaCha8 (`rand_chacha::ChaCha8Rng`) created with
//! `SeedableRng::seed_from_u64`. Shuffles are a descending Fisher-Yates pass
//! where the swap index for position `i` is `(next_u64() * (i + 1)) >> 64`
//! computed in 128-bit arithmetic.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform integer in `0..bound` via widening multiplication.
pub fn below<R: RngCore + ?Sized>(rng: &mut R, bound: usize) -> usize {
    debug_assert!(bound > 0);
    ((u128::from(rng.next_u64()) * bound as u128) >> 64) as usize
}

pub fn shuffle<T, R: RngCore + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

/// Uniform real in `[lo, hi)` using the top 53 bits of one draw.
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * unit
}
