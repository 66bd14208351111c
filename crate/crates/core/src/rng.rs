//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream
//! addressed by `(seed, stream id)`. ChaCha is platform independent and the
//! stream id selects a disjoint keystream, so consumers that draw from
//! different ids never perturb one another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Well-known stream ids. Derived streams mix these with a counter
/// through [`substream`].
pub mod streams {
    pub const TARGET_FIELD: u64 = 1;
    pub const DRY_MASK: u64 = 2;
    pub const ANCILLARY: u64 = 3;
    pub const INIT: u64 = 10;
    pub const BATCH: u64 = 11;
    pub const PROJECTIONS: u64 = 12;
    pub const PERTURB: u64 = 13;
    pub const SAMPLER: u64 = 20;
}

pub fn stream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// A stream id for the `index`-th child of `id` (e.g. per ensemble member
/// or per training step). SplitMix64 finalizer keeps children well spread.
pub fn substream(id: u64, index: u64) -> u64 {
    let mut z = id
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn fill_standard_normal(rng: &mut Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

pub fn standard_normal_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    fill_standard_normal(rng, &mut v);
    v
}
