//! Shared plumbing: parameter vectors, keyed random streams, the loss
//! contract and forward-pass accounting.

mod budget;
mod loss;
mod params;
mod rng;

pub use budget::BudgetMeter;
pub use loss::{evaluate_loss, mse, FnObjective, LossKind, LossSpec, Objective, Scorer, SequenceObjective, TargetTransform};
pub use params::ParameterVector;
pub use rng::{derive_seed, gaussian_sample, uniform_sample, uniform_samples, Purpose, RngStream};
