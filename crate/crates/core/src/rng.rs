//! Seeded random streams.
//!
//! Every random quantity in the crate comes from a [`ChaCha8Rng`] seeded
//! through [`stream`]. Gaussian draws use `rand_distr::StandardNormal`
//! (ziggurat). Substreams are derived with [`mix`], so the sample for
//! replication `i` depends only on `(master_seed, i)` and never on the order
//! in which replications are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Stream = ChaCha8Rng;

/// Tag used to separate the limit-law draws of an experiment from its
/// replications.
pub const LIMIT_TAG: u64 = 0x4c49_4d49_545f_4c41;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Substream seed: `splitmix64(master ^ splitmix64(index))`.
pub fn mix(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(master: u64, index: u64) -> Stream {
    stream(mix(master, index))
}

#[inline]
pub fn std_normal(rng: &mut Stream) -> f64 {
    StandardNormal.sample(rng)
}

/// Fills `out` with independent N(0, var) draws.
pub fn fill_normal(rng: &mut Stream, var: f64, out: &mut [f64]) {
    let sd = var.sqrt();
    for v in out.iter_mut() {
        *v = sd * std_normal(rng);
    }
}
