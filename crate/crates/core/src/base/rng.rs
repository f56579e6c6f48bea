//! Keyed random streams.
//!
//! Every draw in the crate comes from a ChaCha8 generator whose key is the
//! tuple `(master_seed, individual, iteration, purpose)`. ChaCha is a
//! counter-mode construction, so each key addresses an independent stream and
//! the value of a draw never depends on which worker produced it or in what
//! order streams were opened.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a stream is used for. Part of the key, so two purposes with the same
/// `(seed, individual, iteration)` never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    EsNoise = 1,
    SwarmCognitive = 2,
    SwarmSocial = 3,
    PopulationInit = 4,
    WeightInit = 5,
    SearchSample = 6,
    Synthetic = 7,
    SeedDerivation = 8,
    Minibatch = 9,
    Test = 0xFFFF,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub individual: u64,
    pub iteration: u64,
    pub purpose: Purpose,
}

impl RngStream {
    pub fn new(master_seed: u64, individual: u64, iteration: u64, purpose: Purpose) -> Self {
        Self {
            master_seed,
            individual,
            iteration,
            purpose,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.individual.to_le_bytes());
        key[16..24].copy_from_slice(&self.iteration.to_le_bytes());
        key[24..32].copy_from_slice(&(self.purpose as u64).to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

/// `dim` i.i.d. standard normal draws from `stream`.
pub fn gaussian_sample(stream: RngStream, dim: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// First uniform `[0, 1)` draw of `stream`.
pub fn uniform_sample(stream: RngStream) -> f64 {
    stream.rng().random::<f64>()
}

/// First `n` uniform `[0, 1)` draws of `stream`. `uniform_samples(s, 1)[0]`
/// equals `uniform_sample(s)`.
pub fn uniform_samples(stream: RngStream, n: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Child seed for a nested scope, e.g. `(cell, trial)` inside a benchmark.
pub fn derive_seed(master_seed: u64, scope: u64, index: u64) -> u64 {
    RngStream::new(master_seed, scope, index, Purpose::SeedDerivation)
        .rng()
        .next_u64()
}
