//! Seeded random streams.
//!
//! Every stochastic operation takes an explicit stream. Parallel runs derive
//! one stream per shot from a master seed and a counter, so results never
//! depend on scheduling order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type RandomStream = ChaCha12Rng;

pub fn stream(seed: u64) -> RandomStream {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Independent stream number `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> RandomStream {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
