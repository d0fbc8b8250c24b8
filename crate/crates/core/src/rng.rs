//! Seeded random streams and counter-based hashing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The random stream used throughout the crate.
pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ label.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Counter-based uniform in [0, 1): a pure function of its key.
///
/// The simulator keys every random decision on (seed, day, agent, purpose),
/// so changing one parameter does not shift the draws used elsewhere.
#[inline]
pub fn keyed_uniform(seed: u64, a: u64, b: u64, c: u64) -> f64 {
    let mut h = splitmix64(seed ^ 0x5851_F42D_4C95_7F2D);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b.rotate_left(21));
    h = splitmix64(h ^ c.rotate_left(42));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Counter-based draws for one `(seed, day)` pair; a cheaper form of
/// [`keyed_uniform`] when many draws share the first two key components.
#[derive(Debug, Clone, Copy)]
pub struct DayStream {
    key: u64,
}

impl DayStream {
    pub fn new(seed: u64, day: u64) -> Self {
        Self {
            key: splitmix64(splitmix64(seed ^ 0x5851_F42D_4C95_7F2D) ^ day),
        }
    }

    #[inline]
    pub fn uniform(&self, item: u64, purpose: u64) -> f64 {
        let h = splitmix64(
            self.key ^ item.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ purpose.wrapping_mul(0x9FB2_1C65_1E98_DF25),
        );
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Standard normal draw (Box–Muller, one value per call).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.random();
        if u1 > 0.0 {
            let u2: f64 = rng.random();
            return libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2);
        }
    }
}

/// Fisher–Yates shuffle.
pub fn shuffle<T, R: Rng + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
