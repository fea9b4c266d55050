//! Seed discipline: one master seed fans out into independent, named streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Source of randomness an experiment component draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Data = 1,
    Model = 2,
    Posterior = 3,
    TieBreak = 4,
    Targets = 5,
    Acquisition = 6,
    Labels = 7,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a parent seed with a counter into a child seed.
pub fn derive(parent: u64, counter: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(counter.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Per-run seed tree keyed by `(stream, index)`.
#[derive(Debug, Clone, Copy)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn seed(&self, stream: Stream, index: u64) -> u64 {
        derive(derive(self.master, stream as u64), index)
    }

    pub fn rng(&self, stream: Stream, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed(stream, index))
    }
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
