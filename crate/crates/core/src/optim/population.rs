use serde::{Deserialize, Serialize};

use crate::base::{gaussian_sample, ParameterVector, Purpose, RngStream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method", content = "std")]
pub enum InitMethod {
    #[default]
    Zero,
    Gaussian(f64),
}

/// `n` vectors of length `dim`: all zero, or i.i.d. `N(0, std^2)` with
/// individual `i` drawn from its own stream.
pub fn initialize_population(method: InitMethod, n: usize, dim: usize, seed: u64) -> Vec<ParameterVector> {
    (0..n)
        .map(|i| match method {
            InitMethod::Zero => ParameterVector::zeros(dim),
            InitMethod::Gaussian(std) => {
                let stream = RngStream::new(seed, i as u64, 0, Purpose::PopulationInit);
                ParameterVector::from_vec(gaussian_sample(stream, dim).into_iter().map(|z| std * z).collect())
            }
        })
        .collect()
}
