//! Deterministic RNG streams split per concern from one master seed, so
//! ablations that disable e.g. dropout do not shift the sampling stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Independent streams for initialization, edge dropout, edge sampling
/// and negative-sample corruption.
pub struct SeedSplit {
    pub init: ChaCha20Rng,
    pub dropout: ChaCha20Rng,
    pub sampling: ChaCha20Rng,
    pub corruption: ChaCha20Rng,
}

impl SeedSplit {
    pub fn from_master(seed: u64) -> Self {
        let make = |stream: u64| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            rng
        };
        SeedSplit {
            init: make(1),
            dropout: make(2),
            sampling: make(3),
            corruption: make(4),
        }
    }
}
