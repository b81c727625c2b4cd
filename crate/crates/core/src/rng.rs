//! Seeded randomness for sampled checks. `PADYN_SEED` overrides the default seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::padic::{Prime, Rational};

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

pub fn seed() -> u64 {
    std::env::var("PADYN_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

/// Independent stream `stream` derived from the session seed.
pub fn stream(stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed());
    rng.set_stream(stream);
    rng
}

/// Nonzero rational `u * p^v` with `|u|` bounded by `unit_bound` and `v` in `-spread..=spread`.
pub fn rational_with_valuation(
    rng: &mut impl Rng,
    prime: Prime,
    unit_bound: i64,
    spread: i64,
) -> Rational {
    let p = prime.get() as i64;
    let unit = loop {
        let u = rng.gen_range(1..=unit_bound);
        if u % p != 0 {
            break u;
        }
    };
    let den = loop {
        let d = rng.gen_range(1..=unit_bound);
        if d % p != 0 {
            break d;
        }
    };
    let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
    let v = rng.gen_range(-spread..=spread);
    Rational::from_signeds(sign * unit, den) * prime.pow(v)
}
