//! Deterministic random substreams.
//!
//! Every randomized routine draws from a ChaCha8 generator seeded with the
//! user seed and positioned on stream `index` (a repeat, a training step, a
//! generator role). Two substreams with different indices never overlap, so
//! repeats can run in any order or in parallel and still reproduce the same
//! values.
//!
//! Uniform reals are produced as `(next_u64 >> 11) * 2^-53`, which lies in
//! `[0, 1)` and uses the top 53 bits of each 64-bit output.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used throughout the crate.
pub type Substream = ChaCha8Rng;

/// Substream keyed by `(seed, index)`.
pub fn substream(seed: u64, index: u64) -> Substream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw in `[0, 1)`.
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in `0..n` by rejection on the top bits; `n` must be positive.
pub fn uniform_index<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    assert!(n > 0, "uniform_index on empty range");
    let n = n as u64;
    // largest multiple of n that fits in u64
    let zone = u64::MAX - (u64::MAX % n + 1) % n;
    loop {
        let v = rng.next_u64();
        if v <= zone {
            return (v % n) as usize;
        }
    }
}

/// Standard normal draw (Box-Muller, one value per call).
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - unit_f64(rng); // (0, 1]
    let u2 = unit_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
