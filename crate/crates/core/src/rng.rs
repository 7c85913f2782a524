//! Named random streams.
//!
//! Every consumer of randomness asks for a `(purpose, index)` stream derived
//! from one master seed. Two runs that ask for the same stream observe the
//! same demand sequence, which is what the coupling experiments rely on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Demand,
    StartState,
    Depletion,
    Oracle,
    Trial,
    Custom(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Demand => 1,
            Purpose::StartState => 2,
            Purpose::Depletion => 3,
            Purpose::Oracle => 4,
            Purpose::Trial => 5,
            Purpose::Custom(c) => 0x1_0000_0000 | u64::from(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream `index` of the given purpose. ChaCha's 64-bit stream id keeps
    /// the indices of one purpose independent without reseeding.
    pub fn stream(&self, purpose: Purpose, index: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ splitmix64(purpose.tag())));
        rng.set_stream(index);
        rng
    }

    /// Child stream family, e.g. one per trial inside a property suite.
    pub fn fork(&self, purpose: Purpose, index: u64) -> Streams {
        Streams::new(splitmix64(
            self.seed
                ^ splitmix64(purpose.tag()).rotate_left(17)
                ^ splitmix64(index.wrapping_add(0x9e37)),
        ))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
