//! Seeded random streams.
//!
//! Every stochastic routine takes either a `u64` seed or a `&mut SimRng`.
//! ChaCha8 keeps streams identical across platforms and builds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent sub-stream `stream` of `seed`, used to keep network
/// generation, initialization and dynamics from sharing draws.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) mod streams {
    pub const NETWORK: u64 = 1;
    pub const REWIRE: u64 = 2;
    pub const INIT: u64 = 3;
    pub const DYNAMICS: u64 = 4;
}
