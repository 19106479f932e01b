//! Reproducible random streams.
//!
//! Every Monte-Carlo unit of work (a surface cell, a frame, a search restart)
//! draws from its own ChaCha stream keyed by `(master seed, purpose, index)`,
//! so results never depend on how work is split across threads.

use rand_chacha::ChaCha12Rng;
use rand_core::SeedableRng;

/// Random generator used throughout the crate.
pub type StreamRng = ChaCha12Rng;

/// Purpose tags keep streams for different jobs disjoint under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Surface = 1,
    Capacity = 2,
    Frame = 3,
    Search = 4,
    Lifting = 5,
    Test = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream `index` for `purpose` under `master`.
pub fn stream(master: u64, purpose: Purpose, index: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(splitmix64(master ^ splitmix64(purpose as u64)));
    rng.set_stream(index);
    rng
}

/// Derives a child seed, for nesting one seeded job inside another.
pub fn child_seed(master: u64, purpose: Purpose, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(purpose as u64)) ^ index)
}
