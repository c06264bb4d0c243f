//! Reproducible random streams.
//!
//! Every random quantity in the crate is drawn from a stream that is a pure
//! function of a master seed and a small tuple of integer coordinates (for
//! example `(replication, unit)` or `(draw,)`). Streams are ChaCha8 keyed by
//! the master seed, with the 64-bit stream id derived from the coordinates,
//! so results never depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep streams of different subsystems disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    UnitSimulation = 1,
    Bootstrap = 2,
    TruthOracle = 3,
    ReplicationSeed = 4,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes `(domain, a, b)` into a stream id.
pub fn stream_id(domain: Domain, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(domain as u64) ^ a) ^ b)
}

/// Returns the generator for coordinates `(a, b)` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(domain, a, b));
    rng
}

/// Derives a child seed, used to give each Monte Carlo replication its own
/// bootstrap seed.
pub fn child_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    splitmix64(seed ^ stream_id(domain, index, 0))
}
