//! Deterministic random streams.
//!
//! Every Monte Carlo task owns a ChaCha stream keyed by `(seed, stream)`, so
//! results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// Stream index reserved for the out-of-sample evaluation set.
pub const EVAL_STREAM: u64 = u64::MAX;

/// Stream index reserved for synthetic data written by the CLI.
pub const DATA_STREAM: u64 = u64::MAX - 1;

pub fn seeded_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
