//! Seeded random streams.
//!
//! Every stochastic computation takes a 64-bit seed. Independent replicas use
//! distinct ChaCha streams of the same key, so replica `i` is reproducible
//! without generating replicas `0..i` first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn replica_rng(seed: u64, replica: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}
