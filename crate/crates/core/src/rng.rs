//! Seed-derived random sub-streams.
//!
//! Every random draw in an experiment comes from a [`ChaCha8Rng`] seeded by
//! [`derive_seed`]`(master, trial, role)`. The derivation is a fixed SplitMix64
//! chain, so a single trial can be replayed in isolation from the master seed
//! and its index, and the streams for different roles never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Role tags for independent sub-streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    /// Feature draws and label noise of the training stream.
    Data = 1,
    /// Soft-rejection coin flips.
    Coin = 2,
    /// Test set draws.
    Test = 3,
    /// Scenario construction.
    Scenario = 4,
    /// Monte Carlo diagnostics.
    Diagnostics = 5,
    /// Bootstrap resampling.
    Bootstrap = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix(splitmix(splitmix(master) ^ trial) ^ role)`.
pub fn derive_seed(master: u64, trial: u64, role: Role) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ trial);
    splitmix64(b ^ role as u64)
}

pub fn stream(master: u64, trial: u64, role: Role) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, trial, role))
}
