//! Counter-based seeded RNG streams.
//!
//! Every Monte Carlo path gets its own ChaCha stream identified by
//! `(experiment seed, path index)`, so serial and parallel runs produce
//! identical ensembles regardless of execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of substream tags reserved per path index.
const SUBSTREAMS_PER_PATH: u64 = 8;

/// RNG for Monte Carlo path `path_index` of the experiment seeded by `seed`.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    substream_rng(seed, path_index, 0)
}

/// RNG for a tagged substream of a path (e.g. random evaluation points drawn
/// independently of the path noise). `tag` must be < 8.
pub fn substream_rng(seed: u64, path_index: u64, tag: u64) -> ChaCha8Rng {
    debug_assert!(tag < SUBSTREAMS_PER_PATH);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index.wrapping_mul(SUBSTREAMS_PER_PATH) | tag);
    rng
}
