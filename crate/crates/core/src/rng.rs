//! Deterministic random streams.
//!
//! Every experiment is driven by one 64-bit seed. Independent work items
//! (trials, grid cells, synthetic templates) each get their own ChaCha
//! stream selected by a stream id, so results do not depend on scheduling
//! order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of the experiment seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
