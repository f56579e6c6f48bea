//! Trainers over flat parameter vectors.
//!
//! Population methods ([`es`], [`npso`]) follow one loop: initialise, then
//! repeatedly update the population, score every individual once against a
//! budget-metered objective, and update the method's control parameters
//! after all scores of the iteration are in. [`sgd`] is the gradient
//! baseline and is charged one pass per epoch.

pub mod es;
pub mod npso;
mod population;
pub mod sgd;

use serde::{Deserialize, Serialize};

use crate::base::{ParameterVector, Scorer};
use crate::error::{Error, Result};

pub use es::{es_step, EsConfig, EvolutionStrategy, RewardShaping};
pub use npso::{npso_step, NpsoConfig, Particle, SwarmOptimizer, SwarmState};
pub use population::{initialize_population, InitMethod};
pub use sgd::{sgd_train, SgdConfig, SgdOutcome};

/// A population-based optimiser driven by [`run_population`].
pub trait PopulationMethod {
    type State;

    fn iterations(&self) -> usize;

    /// Individuals scored per iteration.
    fn population(&self) -> usize;

    fn initialize(&self, dim: usize, seed: u64) -> Self::State;

    /// Iteration `k` (1-based). On error the previous state stays valid.
    fn step(&self, state: &Self::State, k: u64, scorer: &Scorer<'_>, seed: u64) -> Result<(Self::State, Vec<f64>)>;

    /// The vector used for forecasting.
    fn best(&self, state: &Self::State) -> ParameterVector;

    /// Best loss known for [`best`](Self::best), if the method tracks one.
    fn best_loss(&self, state: &Self::State) -> Option<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PboOutcome {
    pub theta: ParameterVector,
    pub best_loss: Option<f64>,
    pub iterations_run: usize,
    /// Per iteration: minimum loss scored by the population.
    pub history: Vec<f64>,
    pub forward_passes: u64,
}

/// Runs `method` for its configured iterations or until the meter cannot pay
/// for another full iteration. A partially affordable iteration is skipped
/// whole.
pub fn run_population<M: PopulationMethod>(method: &M, scorer: &Scorer<'_>, seed: u64) -> Result<PboOutcome> {
    if method.population() == 0 || method.iterations() == 0 {
        return Err(Error::config("population and iterations must be at least 1"));
    }
    let start = scorer.meter().used();
    let mut state = method.initialize(scorer.dim(), seed);
    let mut history = Vec::with_capacity(method.iterations());
    for k in 1..=method.iterations() as u64 {
        match method.step(&state, k, scorer, seed) {
            Ok((next, losses)) => {
                state = next;
                history.push(losses.iter().copied().fold(f64::INFINITY, f64::min));
            }
            Err(Error::BudgetExhausted { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(PboOutcome {
        theta: method.best(&state),
        best_loss: method.best_loss(&state),
        iterations_run: history.len(),
        history,
        forward_passes: scorer.meter().used() - start,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    Sgd,
    Es,
    Npso,
}

impl TrainerKind {
    pub const ALL: [TrainerKind; 3] = [TrainerKind::Sgd, TrainerKind::Es, TrainerKind::Npso];

    pub fn name(self) -> &'static str {
        match self {
            TrainerKind::Sgd => "sgd",
            TrainerKind::Es => "es",
            TrainerKind::Npso => "npso",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TrainerKind::Sgd => "SGD",
            TrainerKind::Es => "ES",
            TrainerKind::Npso => "NPSO",
        }
    }
}

impl std::str::FromStr for TrainerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(TrainerKind::Sgd),
            "es" => Ok(TrainerKind::Es),
            "npso" | "pso" => Ok(TrainerKind::Npso),
            other => Err(Error::config(format!("unknown trainer {other:?}"))),
        }
    }
}
