//! Random hyperparameter search under a per-cell pass budget.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{BudgetMeter, Objective, ParameterVector, Purpose, RngStream, Scorer, SequenceObjective};
use crate::cells::{CellKind, CellSpec, Network};
use crate::data::{SequenceDataset, Split};
use crate::error::{Error, Result};
use crate::optim::{run_population, sgd_train, EsConfig, EvolutionStrategy, NpsoConfig, SgdConfig, SwarmOptimizer, TrainerKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Range { low: f64, high: f64, scale: Scale },
    Choice(Vec<f64>),
}

impl Axis {
    pub fn linear(low: f64, high: f64) -> Self {
        Axis::Range {
            low,
            high,
            scale: Scale::Linear,
        }
    }

    pub fn log(low: f64, high: f64) -> Self {
        Axis::Range {
            low,
            high,
            scale: Scale::Log,
        }
    }

    pub fn fixed(value: f64) -> Self {
        Axis::Choice(vec![value])
    }

    /// A degenerate range (`low == high`) is allowed and always yields `low`.
    pub fn validate(&self, name: &str) -> Result<()> {
        match self {
            Axis::Range { low, high, scale } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return Err(Error::config(format!("axis {name}: need finite low <= high")));
                }
                if *scale == Scale::Log && *low <= 0.0 {
                    return Err(Error::config(format!("axis {name}: log scale needs low > 0")));
                }
            }
            Axis::Choice(values) => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(format!("axis {name}: choices must be finite and non-empty")));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Axis::Range { low, high, .. } if low == high => *low,
            Axis::Range {
                low,
                high,
                scale: Scale::Linear,
            } => rng.random_range(*low..*high),
            Axis::Range {
                low,
                high,
                scale: Scale::Log,
            } => rng.random_range(low.ln()..high.ln()).exp().clamp(*low, *high),
            Axis::Choice(values) => values[rng.random_range(0..values.len())],
        }
    }
}

/// One sampled configuration, keyed by axis name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hyperparams(pub BTreeMap<String, f64>);

impl Hyperparams {
    pub fn get(&self, name: &str) -> Result<f64> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| Error::config(format!("missing hyperparameter {name:?}")))
    }

    fn count(&self, name: &str) -> Result<usize> {
        let v = self.get(name)?;
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::config(format!("{name} must be a positive integer, got {v}")));
        }
        Ok(v as usize)
    }
}

impl fmt::Display for Hyperparams {
    /// `name=value` pairs joined by `;`, values in shortest round-trip form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{k}={v:?}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Hyperparams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for pair in s.split(';').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::config(format!("bad hyperparameter entry {pair:?}")))?;
            let v: f64 = v.parse().map_err(|_| Error::config(format!("bad value in {pair:?}")))?;
            map.insert(k.to_string(), v);
        }
        Ok(Hyperparams(map))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    pub axes: BTreeMap<String, Axis>,
}

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, axis: Axis) -> Self {
        self.axes.insert(name.to_string(), axis);
        self
    }

    /// Default ranges per trainer.
    pub fn default_for(trainer: TrainerKind) -> Self {
        let hidden = Axis::Choice(vec![5.0, 10.0, 20.0, 40.0]);
        match trainer {
            TrainerKind::Es => Self::new()
                .with("learning_rate", Axis::log(1e-3, 1.0))
                .with("noise_std", Axis::log(1e-3, 1.0))
                .with("hidden_dim", hidden),
            TrainerKind::Npso => Self::new()
                .with("inertia", Axis::linear(0.4, 0.99))
                .with("init_std", Axis::log(0.01, 1.0))
                .with("hidden_dim", hidden),
            TrainerKind::Sgd => Self::new()
                .with("learning_rate", Axis::log(1e-4, 1e-2))
                .with("minibatch_size", Axis::Choice(vec![1.0, 2.0, 4.0, 8.0]))
                .with("hidden_dim", hidden),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.axes.iter().try_for_each(|(name, axis)| axis.validate(name))
    }

    /// Draws one configuration; axes are visited in name order.
    pub fn sample(&self, seed: u64) -> Hyperparams {
        let mut rng = RngStream::new(seed, 0, 0, Purpose::SearchSample).rng();
        Hyperparams(self.axes.iter().map(|(k, a)| (k.clone(), a.sample(&mut rng))).collect())
    }
}

/// Fixed settings of one (architecture, trainer) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellPlan {
    pub architecture: CellKind,
    pub trainer: TrainerKind,
    pub search_iterations: usize,
    /// Passes granted to each trial.
    pub trial_budget: u64,
    /// PBO individuals per iteration.
    pub population: usize,
    pub truncation_length: usize,
    pub sgd_patience: usize,
}

impl CellPlan {
    pub fn cell_budget(&self) -> u64 {
        self.trial_budget * self.search_iterations as u64
    }

    /// PBO iterations per trial.
    pub fn pbo_iterations(&self) -> usize {
        (self.trial_budget / self.population.max(1) as u64) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub params: Hyperparams,
    pub theta: ParameterVector,
    pub val_loss: f64,
    pub forward_passes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: TrialOutcome,
    /// Validation loss of every trial, in trial order.
    pub val_losses: Vec<f64>,
    pub forward_passes: u64,
}

/// Trains one configuration on the training split within its own meter and
/// scores the result on the validation split.
pub fn train_trial(plan: &CellPlan, params: &Hyperparams, data: &SequenceDataset, seed: u64) -> Result<(ParameterVector, f64, u64)> {
    let hidden = params.count("hidden_dim")?;
    let net = Network::new(CellSpec::of_kind(plan.architecture, data.n_features, hidden, 1))?;
    let meter = BudgetMeter::new(plan.trial_budget);
    let theta = match plan.trainer {
        TrainerKind::Sgd => {
            let cfg = SgdConfig {
                learning_rate: params.get("learning_rate")?,
                minibatch_size: params.count("minibatch_size")?,
                max_epochs: plan.trial_budget as usize,
                truncation_length: plan.truncation_length,
                patience: plan.sgd_patience,
                ..SgdConfig::default()
            };
            sgd_train(&cfg, data, &net, &meter, seed)?.theta
        }
        TrainerKind::Es => {
            let cfg = EsConfig::new(
                params.get("learning_rate")?,
                params.get("noise_std")?,
                plan.population,
                plan.pbo_iterations(),
            );
            let objective = SequenceObjective::new(data, &net, Split::Train)?;
            run_population(&EvolutionStrategy::new(cfg)?, &Scorer::new(&objective, &meter), seed)?.theta
        }
        TrainerKind::Npso => {
            let cfg = NpsoConfig::new(
                params.get("inertia")?,
                params.get("init_std")?,
                plan.population,
                plan.pbo_iterations(),
            );
            let objective = SequenceObjective::new(data, &net, Split::Train)?;
            run_population(&SwarmOptimizer::new(cfg)?, &Scorer::new(&objective, &meter), seed)?.theta
        }
    };
    let val = SequenceObjective::new(data, &net, Split::Validation)?.loss(&theta);
    Ok((theta, val, meter.used()))
}

/// Seed of trial `index` in the cell numbered `cell`.
pub fn trial_seed(master_seed: u64, cell: u64, index: usize) -> u64 {
    crate::base::derive_seed(master_seed, cell, index as u64)
}

/// Runs `plan.search_iterations` independent trials in parallel, returned in
/// trial order. Each trial draws everything from its own seed.
pub fn run_trials(space: &SearchSpace, plan: &CellPlan, data: &SequenceDataset, master_seed: u64, cell: u64) -> Result<Vec<TrialOutcome>> {
    space.validate()?;
    if plan.search_iterations == 0 || plan.trial_budget == 0 {
        return Err(Error::config("search needs at least one trial and a positive budget"));
    }
    if plan.trainer != TrainerKind::Sgd && plan.pbo_iterations() == 0 {
        return Err(Error::config("trial budget is smaller than one population"));
    }
    (0..plan.search_iterations)
        .into_par_iter()
        .map(|index| {
            let seed = trial_seed(master_seed, cell, index);
            let params = space.sample(seed);
            let (theta, val_loss, forward_passes) = train_trial(plan, &params, data, seed)?;
            log::debug!(
                "{}/{} trial {index}: val {val_loss:.6} ({params})",
                plan.architecture.name(),
                plan.trainer.name()
            );
            Ok(TrialOutcome {
                index,
                params,
                theta,
                val_loss,
                forward_passes,
            })
        })
        .collect()
}

/// Lowest finite validation loss, the earlier trial on ties.
pub fn select_best(trials: &[TrialOutcome]) -> Result<&TrialOutcome> {
    trials
        .iter()
        .filter(|t| t.val_loss.is_finite())
        .reduce(|a, b| if b.val_loss < a.val_loss { b } else { a })
        .ok_or(Error::AllTrialsDiverged)
}

/// Random search over `space`, keeping the trial with the lowest validation
/// loss.
pub fn random_search(space: &SearchSpace, plan: &CellPlan, data: &SequenceDataset, master_seed: u64, cell: u64) -> Result<SearchOutcome> {
    let trials = run_trials(space, plan, data, master_seed, cell)?;
    Ok(SearchOutcome {
        best: select_best(&trials)?.clone(),
        val_losses: trials.iter().map(|t| t.val_loss).collect(),
        forward_passes: trials.iter().map(|t| t.forward_passes).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data() -> SequenceDataset {
        let n = 120;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let ys: Vec<f64> = (0..n).map(|i| ((i + 1) as f64 * 0.3).sin()).collect();
        SequenceDataset::from_parts(xs, 1, ys, 72, 96).unwrap()
    }

    fn plan(trainer: TrainerKind, trials: usize) -> CellPlan {
        CellPlan {
            architecture: CellKind::Lstm,
            trainer,
            search_iterations: trials,
            trial_budget: 40,
            population: 4,
            truncation_length: 20,
            sgd_patience: 20,
        }
    }

    fn small_space(trainer: TrainerKind) -> SearchSpace {
        SearchSpace::default_for(trainer).with("hidden_dim", Axis::fixed(2.0))
    }

    #[test]
    fn log_axis_stays_in_range() {
        let space = SearchSpace::new().with("a", Axis::log(1e-4, 1e-2)).with("b", Axis::linear(-1.0, 1.0));
        for seed in 0..500 {
            let p = space.sample(seed);
            let a = p.get("a").unwrap();
            assert!((1e-4..=1e-2).contains(&a));
            assert!((-1.0..1.0).contains(&p.get("b").unwrap()));
        }
    }

    #[test]
    fn log_axis_is_uniform_in_log() {
        let space = SearchSpace::new().with("a", Axis::log(1e-4, 1.0));
        let below = (0..4000).filter(|&s| space.sample(s).get("a").unwrap() < 1e-2).count();
        // half of the log range lies below 1e-2
        assert!((below as f64 / 4000.0 - 0.5).abs() < 0.03, "{below}");
    }

    #[test]
    fn degenerate_axis_is_shared() {
        let space = SearchSpace::new().with("a", Axis::linear(0.3, 0.3)).with("b", Axis::log(2.0, 2.0));
        for seed in 0..20 {
            let p = space.sample(seed);
            assert_eq!(p.get("a").unwrap(), 0.3);
            assert_eq!(p.get("b").unwrap(), 2.0);
        }
    }

    #[test]
    fn invalid_axes() {
        assert!(Axis::linear(1.0, 0.0).validate("x").is_err());
        assert!(Axis::log(0.0, 1.0).validate("x").is_err());
        assert!(Axis::Choice(vec![]).validate("x").is_err());
    }

    #[test]
    fn ties_go_to_the_earlier_trial() {
        let t = |index, val_loss| TrialOutcome {
            index,
            params: Hyperparams::default(),
            theta: ParameterVector::zeros(1),
            val_loss,
            forward_passes: 0,
        };
        let trials = [t(0, f64::NAN), t(1, 2.0), t(2, 1.0), t(3, 1.0), t(4, f64::INFINITY)];
        assert_eq!(select_best(&trials).unwrap().index, 2);
        assert!(matches!(select_best(&trials[..1]), Err(Error::AllTrialsDiverged)));
    }

    #[test]
    fn hyperparams_text_round_trip() {
        let p = SearchSpace::default_for(TrainerKind::Es).sample(9);
        let back: Hyperparams = p.to_string().parse().unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn single_trial_is_the_winner() {
        let data = toy_data();
        let out = random_search(&small_space(TrainerKind::Es), &plan(TrainerKind::Es, 1), &data, 5, 0).unwrap();
        assert_eq!(out.best.index, 0);
        assert_eq!(out.val_losses.len(), 1);
        assert_eq!(out.forward_passes, 40);
    }

    #[test]
    fn seeded_search_repeats() {
        let data = toy_data();
        for trainer in TrainerKind::ALL {
            let space = small_space(trainer);
            let a = random_search(&space, &plan(trainer, 5), &data, 11, 2).unwrap();
            let b = random_search(&space, &plan(trainer, 5), &data, 11, 2).unwrap();
            assert_eq!(a, b);
            assert!(a.forward_passes <= 200);
            let min = a.val_losses.iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(a.best.val_loss, min);
            assert_eq!(a.val_losses.iter().position(|&v| v == min), Some(a.best.index));
        }
    }

    #[test]
    fn pbo_trials_spend_exact_shares() {
        let data = toy_data();
        let out = random_search(&small_space(TrainerKind::Npso), &plan(TrainerKind::Npso, 3), &data, 1, 1).unwrap();
        assert_eq!(out.forward_passes, 3 * 40);
    }
}
