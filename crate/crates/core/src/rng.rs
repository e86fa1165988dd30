//! Seeded random streams.
//!
//! Every independent work item (replicate, resample, chain) gets its own
//! ChaCha stream keyed by `(seed, index)`, so results never depend on which
//! worker ran the item or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
