//! Seed derivation for reproducible, worker-count independent streams.
//!
//! Every episode, profile and update draws from its own ChaCha stream keyed by
//! `(root seed, purpose, index...)`, so the order in which parallel workers
//! finish never changes any random draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Distinct purposes get distinct streams even for equal indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Collect = 2,
    Minibatch = 3,
    Update = 4,
    Evaluate = 5,
    Grid = 6,
    Environment = 7,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a root seed with a stream tag and an index path into a 64-bit seed.
pub fn derive_seed(root: u64, stream: Stream, path: &[u64]) -> u64 {
    let mut h = splitmix(root ^ splitmix(stream as u64));
    for &p in path {
        h = splitmix(h ^ splitmix(p.wrapping_add(0x5851_f42d_4c95_7f2d)));
    }
    h
}

pub fn stream(root: u64, stream: Stream, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(root, stream, path))
}
