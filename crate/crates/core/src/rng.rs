//! Counter-based random sub-streams.
//!
//! Every random draw in training and sampling comes from a ChaCha8 stream
//! keyed by `(seed, purpose, step, index)` with the patch number as stream
//! id. Draw order inside one stream never depends on how work is scheduled,
//! so parallel evaluation cannot change results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    GeneratorInit = 1,
    CriticInit = 2,
    CriticNoise = 3,
    CriticWindows = 4,
    GeneratorNoise = 5,
    GeneratorWindows = 6,
    Sampling = 7,
    Evaluation = 8,
    Surrogate = 9,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, purpose: Purpose, step: u64, index: u64, patch: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        for (chunk, word) in key
            .chunks_exact_mut(8)
            .zip([self.seed, purpose as u64, step, index])
        {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(patch);
        rng
    }
}
