//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn through [`RngStream`], a thin
//! wrapper over ChaCha8 that counts the draws it hands out. Replicas of a chain
//! use the same seed on distinct ChaCha streams, so results never depend on
//! scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Stream `stream` of the generator keyed by `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            seed,
            stream,
            draws: 0,
            rng,
        }
    }

    /// Stream for replica `replica` of the run keyed by `(seed, cell)`.
    ///
    /// Cells index independent jobs of a sweep; single runs use cell 0.
    pub fn derived(seed: u64, cell: u32, replica: u32) -> Self {
        Self::with_stream(seed, (u64::from(cell) << 32) | u64::from(replica))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of draws consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`. Panics when `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.draws += 1;
        self.rng.random_range(0..n)
    }
}
