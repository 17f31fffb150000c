//! Reproducible random number streams.
//!
//! All randomness flows from one 64-bit seed. Child streams are derived by
//! mixing tags into the ChaCha stream id, so distinct replications and
//! distinct components inside one replication (jumps, Brownian part, small
//! jumps) consume statistically independent streams while staying fully
//! deterministic and independent of thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A (seed, stream) pair identifying one ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn root(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Derive a child stream from a tag (replication index, component id...).
    pub fn child(&self, tag: u64) -> Self {
        Self { seed: self.seed, stream: splitmix64(self.stream ^ splitmix64(tag)) }
    }

    /// Replication `r` of a Monte Carlo experiment.
    pub fn replication(&self, r: u64) -> Self {
        self.child(r.wrapping_add(1))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Component tags used by the simulator.
pub(crate) mod component {
    pub const JUMPS: u64 = 0x4a55_4d50; // "JUMP"
    pub const BROWNIAN: u64 = 0x4252_4f57; // "BROW"
    pub const SMALL: u64 = 0x534d_414c; // "SMAL"
}
