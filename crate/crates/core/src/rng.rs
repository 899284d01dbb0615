//! Seeded randomness.
//!
//! Every random decision in the toolkit draws from a ChaCha stream keyed by
//! `(seed, key)`. The key is a record index, an epoch number or a parameter
//! slot, so results never depend on the order in which work is scheduled.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Counter-based generator for one `(seed, key)` pair.
pub fn keyed(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Uniform draw from `[0, 1)` with 53 bits of precision.
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One fair coin flip.
pub fn coin<R: RngCore + ?Sized>(rng: &mut R) -> bool {
    rng.next_u64() >> 63 == 1
}

/// Standard normal draw (Box-Muller, one value per call).
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let mut u1 = unit_f64(rng);
    while u1 <= f64::MIN_POSITIVE {
        u1 = unit_f64(rng);
    }
    let u2 = unit_f64(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// Uniform integer in `0..bound`, rejection-sampled to avoid modulo bias.
pub fn below<R: RngCore + ?Sized>(rng: &mut R, bound: u64) -> u64 {
    assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

/// Fisher-Yates shuffle.
pub fn shuffle<T, R: RngCore + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
