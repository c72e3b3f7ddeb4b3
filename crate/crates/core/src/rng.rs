//! Seed handling.
//!
//! Every stochastic quantity derives from a single 64-bit run seed. Child
//! seeds are produced by a counter-based SplitMix64 mix of `(parent, stream)`,
//! so a campaign worker's seed depends only on its index and never on
//! scheduling order:
//!
//! ```text
//! run seed ─┬─ derive(seed, BATH_STREAM)            → bath generator
//!           └─ derive(seed, FREQUENCY_STREAM + i)   → environment RNG of
//!                                                     campaign frequency i
//! ```
//!
//! Measurement noise and fluctuator switching then draw from the
//! environment's own ChaCha stream.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

pub const BATH_STREAM: u64 = 0x6261_7468;
pub const FREQUENCY_STREAM: u64 = 0x0001_0000_0000;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent child seed for `stream` from `parent`.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
