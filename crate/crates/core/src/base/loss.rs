use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BudgetMeter, ParameterVector};
use crate::cells::Network;
use crate::data::{SequenceDataset, Split};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Mse,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetTransform {
    Identity,
    Log,
    #[default]
    StandardizedLog,
}

impl std::str::FromStr for TargetTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "log" => Ok(Self::Log),
            "standardized-log" => Ok(Self::StandardizedLog),
            other => Err(Error::config(format!("unknown transform {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub target_transform: TargetTransform,
}

pub fn mse(predictions: &[f64], targets: &[f64]) -> f64 {
    debug_assert_eq!(predictions.len(), targets.len());
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum();
    sum / targets.len() as f64
}

/// A pure loss over flat parameter vectors. Non-finite values signal
/// divergent weights.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn loss(&self, theta: &[f64]) -> f64;
}

/// Wraps a closure as an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        (self.f)(theta)
    }
}

/// MSE of a network over one split of a dataset. The network always runs
/// from the zero state at row 0, so validation and test predictions are
/// conditioned on the full preceding history.
pub struct SequenceObjective<'a> {
    pub data: &'a SequenceDataset,
    pub net: &'a Network,
    pub split: Split,
}

impl<'a> SequenceObjective<'a> {
    pub fn new(data: &'a SequenceDataset, net: &'a Network, split: Split) -> Result<Self> {
        if net.spec().output_dim != 1 || net.spec().input_dim != data.n_features {
            return Err(Error::config(format!(
                "network ({} in, {} out) does not fit a dataset with {} features and scalar targets",
                net.spec().input_dim,
                net.spec().output_dim,
                data.n_features
            )));
        }
        if data.range(split).is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self { data, net, split })
    }

    pub fn try_loss(&self, theta: &[f64]) -> Result<f64> {
        let range = self.data.range(self.split);
        let mut state = self.net.zero_state();
        let mut out = Vec::with_capacity(range.end);
        self.net.run(
            theta,
            &mut state,
            self.data.inputs_until(range.end),
            self.data.times_until(range.end),
            &mut out,
        )?;
        Ok(mse(&out[range.clone()], &self.data.targets[range]))
    }
}

impl Objective for SequenceObjective<'_> {
    fn dim(&self) -> usize {
        self.net.num_params()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        self.try_loss(theta).unwrap_or(f64::INFINITY)
    }
}

/// Full-sequence training loss of `theta`, charging one pass to `meter`.
pub fn evaluate_loss(
    data: &SequenceDataset,
    net: &Network,
    theta: &ParameterVector,
    loss: &LossSpec,
    meter: &BudgetMeter,
) -> Result<f64> {
    if loss.target_transform != data.transform {
        return Err(Error::config("loss transform differs from the dataset transform"));
    }
    net.layout().check(theta)?;
    let objective = SequenceObjective::new(data, net, Split::Train)?;
    meter.try_consume(1)?;
    match objective.try_loss(theta) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) | Err(Error::Divergence { .. }) => Err(Error::NonFiniteLoss),
        Err(e) => Err(e),
    }
}

/// An objective bound to a budget meter. Every scored vector costs one pass;
/// non-finite losses come back as `+inf`.
pub struct Scorer<'a> {
    objective: &'a dyn Objective,
    meter: &'a BudgetMeter,
}

impl<'a> Scorer<'a> {
    pub fn new(objective: &'a dyn Objective, meter: &'a BudgetMeter) -> Self {
        Self { objective, meter }
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn meter(&self) -> &BudgetMeter {
        self.meter
    }

    pub fn score(&self, theta: &[f64]) -> Result<f64> {
        self.meter.try_consume(1)?;
        Ok(finite_or_inf(self.objective.loss(theta)))
    }

    /// Scores a whole population, possibly in parallel. The charge for all
    /// members is taken up front, so an insufficient budget scores nothing.
    pub fn score_all(&self, population: &[ParameterVector]) -> Result<Vec<f64>> {
        self.meter.try_consume(population.len() as u64)?;
        Ok(population
            .par_iter()
            .map(|theta| finite_or_inf(self.objective.loss(theta)))
            .collect())
    }
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}
