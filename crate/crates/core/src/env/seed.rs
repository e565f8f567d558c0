//! Seed expansion.
//!
//! A run seed expands into per-task seeds with SplitMix64: the state advances
//! by `0x9E3779B97F4A7C15` and each output is the standard SplitMix64 finalizer
//! of the new state. Independent streams for different purposes are derived by
//! mixing a label into the base seed with [`derive`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a labelled sub-stream (e.g. one task type, or few-shot tasks).
pub fn derive(base: u64, label: u64) -> u64 {
    splitmix64(base ^ splitmix64(label.wrapping_add(GOLDEN)))
}

#[derive(Debug, Clone)]
pub struct SeedStream {
    state: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_seed(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        splitmix64(self.state)
    }
}

/// Platform-independent RNG for instance construction.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
