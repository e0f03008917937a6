//! Counter-based random streams.
//!
//! Every simulated path draws from its own ChaCha8 stream selected by
//! `(seed, path_index)`, so Monte Carlo estimates do not depend on how paths
//! are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

pub fn path_rng(seed: u64, path_index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}
