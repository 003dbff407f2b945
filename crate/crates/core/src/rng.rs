//! Deterministic RNG plumbing.
//!
//! Every randomized routine takes a u64 seed and derives per-trial
//! generators as independent ChaCha8 streams: trial k runs on
//! `substream(seed, k)`. Streams never overlap, so trials can run in
//! parallel (or in any order) and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn root(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
