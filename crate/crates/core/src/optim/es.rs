//! Evolution strategies: one centre point, Gaussian perturbations, and a
//! reward-weighted step along the sampled noise.
//!
//! ```text
//! theta_i   = theta_g + sigma * eps_i,       eps_i ~ N(0, I), i = 1..N
//! R_i       = -L(theta_i)
//! theta_g  <- theta_g + alpha / (sigma N) * sum_i R_i eps_i
//! ```

use serde::{Deserialize, Serialize};

use super::{InitMethod, PopulationMethod};
use crate::base::{gaussian_sample, ParameterVector, Purpose, RngStream, Scorer};
use crate::error::{Error, Result};

/// How raw rewards `R_i = -L_i` are turned into update weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardShaping {
    /// `R_i` as is.
    Raw,
    /// `R_i` minus the mean reward of the other individuals. Same expected
    /// update as `Raw`, without the variance contributed by the loss level.
    #[default]
    Centered,
    /// Centred ranks in `[-0.5, 0.5]`.
    Rank,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsConfig {
    pub learning_rate: f64,
    pub noise_std: f64,
    pub population: usize,
    pub max_iterations: usize,
    #[serde(default)]
    pub init: InitMethod,
    /// Explicit starting point; overrides `init`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_weights: Option<ParameterVector>,
    #[serde(default)]
    pub shaping: RewardShaping,
}

impl EsConfig {
    pub fn new(learning_rate: f64, noise_std: f64, population: usize, max_iterations: usize) -> Self {
        Self {
            learning_rate,
            noise_std,
            population,
            max_iterations,
            init: InitMethod::Zero,
            initial_weights: None,
            shaping: RewardShaping::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.noise_std > 0.0) {
            return Err(Error::config("ES needs learning rate > 0 and noise std > 0"));
        }
        if self.population == 0 || self.max_iterations == 0 {
            return Err(Error::config("ES needs population and iterations >= 1"));
        }
        Ok(())
    }
}

/// Result of one ES iteration.
#[derive(Clone, Debug)]
pub struct EsStep {
    pub theta: ParameterVector,
    pub losses: Vec<f64>,
}

/// The noise vector of individual `i` at iteration `k`.
pub fn es_noise(seed: u64, i: usize, k: u64, dim: usize) -> Vec<f64> {
    gaussian_sample(RngStream::new(seed, i as u64, k, Purpose::EsNoise), dim)
}

fn update_weights(losses: &[f64], shaping: RewardShaping) -> Vec<f64> {
    let worst_finite = losses.iter().copied().filter(|l| l.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if worst_finite == f64::NEG_INFINITY {
        // nothing finite to learn from
        return vec![0.0; losses.len()];
    }
    let rewards: Vec<f64> = losses
        .iter()
        .map(|&l| if l.is_finite() { -l } else { -worst_finite })
        .collect();
    let n = rewards.len();
    match shaping {
        RewardShaping::Raw => rewards,
        RewardShaping::Centered if n == 1 => rewards,
        RewardShaping::Centered => {
            let total: f64 = rewards.iter().sum();
            rewards
                .iter()
                .map(|&r| r - (total - r) / (n - 1) as f64)
                .collect()
        }
        RewardShaping::Rank if n == 1 => vec![0.0],
        RewardShaping::Rank => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| rewards[a].total_cmp(&rewards[b]));
            let mut ranked = vec![0.0; n];
            for (rank, &i) in order.iter().enumerate() {
                ranked[i] = rank as f64 / (n - 1) as f64 - 0.5;
            }
            ranked
        }
    }
}

/// One ES iteration from `theta_g` at iteration `k`. Exactly `population`
/// passes are charged; if the meter cannot pay for all of them nothing is
/// scored and the error is returned with `theta_g` untouched.
pub fn es_step(theta_g: &ParameterVector, k: u64, cfg: &EsConfig, scorer: &Scorer<'_>, seed: u64) -> Result<EsStep> {
    cfg.validate()?;
    let dim = theta_g.len();
    if dim != scorer.dim() {
        return Err(Error::DimensionMismatch {
            expected: scorer.dim(),
            got: dim,
        });
    }
    let noise: Vec<Vec<f64>> = (0..cfg.population).map(|i| es_noise(seed, i, k, dim)).collect();
    let population: Vec<ParameterVector> = noise.iter().map(|eps| theta_g.offset(cfg.noise_std, eps)).collect();
    let losses = scorer.score_all(&population)?;
    let weights = update_weights(&losses, cfg.shaping);

    let mut step = vec![0.0; dim];
    for (w, eps) in weights.iter().zip(&noise) {
        for (s, e) in step.iter_mut().zip(eps) {
            *s += w * e;
        }
    }
    let scale = cfg.learning_rate / (cfg.noise_std * cfg.population as f64);
    Ok(EsStep {
        theta: theta_g.offset(scale, &step),
        losses,
    })
}

pub struct EvolutionStrategy {
    pub cfg: EsConfig,
}

impl EvolutionStrategy {
    pub fn new(cfg: EsConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }
}

impl PopulationMethod for EvolutionStrategy {
    type State = ParameterVector;

    fn iterations(&self) -> usize {
        self.cfg.max_iterations
    }

    fn population(&self) -> usize {
        self.cfg.population
    }

    fn initialize(&self, dim: usize, seed: u64) -> ParameterVector {
        match &self.cfg.initial_weights {
            Some(theta) => theta.clone(),
            None => super::initialize_population(self.cfg.init, 1, dim, seed).remove(0),
        }
    }

    fn step(&self, state: &ParameterVector, k: u64, scorer: &Scorer<'_>, seed: u64) -> Result<(ParameterVector, Vec<f64>)> {
        let out = es_step(state, k, &self.cfg, scorer, seed)?;
        Ok((out.theta, out.losses))
    }

    fn best(&self, state: &ParameterVector) -> ParameterVector {
        state.clone()
    }

    fn best_loss(&self, _: &ParameterVector) -> Option<f64> {
        None
    }
}
