use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::search::{run_trials, select_best, CellPlan, Hyperparams};
use crate::base::{BudgetMeter, Objective, SequenceObjective};
use crate::cells::{CellKind, CellSpec, Network};
use crate::data::{SequenceDataset, Split};
use crate::error::{Error, Result};
use crate::optim::TrainerKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    /// No trial produced a finite validation loss, or the winner's test loss
    /// is not finite.
    Diverged,
    NotImplemented,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub architecture: CellKind,
    pub trainer: TrainerKind,
    pub status: CellStatus,
    pub test_mse: Option<f64>,
    pub normalised_mse: Option<f64>,
    pub val_mse: Option<f64>,
    pub hyperparameters: Hyperparams,
    pub forward_passes: u64,
    pub budget: u64,
    /// Free-text detail, e.g. the raw loss of a diverged run.
    pub note: Option<String>,
    /// Excluded from serialized output so reruns produce identical files.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl CellResult {
    fn empty(plan: &CellPlan, status: CellStatus) -> Self {
        Self {
            architecture: plan.architecture,
            trainer: plan.trainer,
            status,
            test_mse: None,
            normalised_mse: None,
            val_mse: None,
            hyperparameters: Hyperparams::default(),
            forward_passes: 0,
            budget: plan.cell_budget(),
            note: None,
            wall_time_secs: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub cells: Vec<CellResult>,
}

impl ResultTable {
    pub fn get(&self, architecture: CellKind, trainer: TrainerKind) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.architecture == architecture && c.trainer == trainer)
    }

    /// Fills `normalised_mse` by dividing each test MSE by the LSTM+SGD cell.
    /// Leaves it empty when that reference is missing or unusable.
    pub fn normalise(&mut self) {
        let reference = self
            .get(CellKind::Lstm, TrainerKind::Sgd)
            .and_then(|c| c.test_mse)
            .filter(|v| v.is_finite() && *v > 0.0);
        for cell in &mut self.cells {
            cell.normalised_mse = match (reference, cell.test_mse) {
                (Some(r), Some(m)) => Some(m / r),
                _ => None,
            };
        }
    }

    /// Fails if any cell spent more than its budget.
    pub fn check_budgets(&self) -> Result<()> {
        for c in &self.cells {
            if c.forward_passes > c.budget {
                return Err(Error::BudgetParity(format!(
                    "{}/{} used {} passes, cap {}",
                    c.architecture.name(),
                    c.trainer.name(),
                    c.forward_passes,
                    c.budget
                )));
            }
        }
        Ok(())
    }
}

fn test_mse(plan: &CellPlan, data: &SequenceDataset, hidden: usize, theta: &[f64]) -> Result<f64> {
    let net = Network::new(CellSpec::of_kind(plan.architecture, data.n_features, hidden, 1))?;
    Ok(SequenceObjective::new(data, &net, Split::Test)?.loss(theta))
}

/// Runs one cell's search under its own meter and scores the winner once on
/// the test split.
pub fn run_cell(cfg: &ExperimentConfig, plan: &CellPlan, cell_id: u64, data: &SequenceDataset) -> Result<CellResult> {
    if plan.trainer == TrainerKind::Sgd && plan.architecture != CellKind::Lstm {
        let mut r = CellResult::empty(plan, CellStatus::NotImplemented);
        r.note = Some(format!("gradient training of {} is not implemented", plan.architecture.label()));
        return Ok(r);
    }
    let started = Instant::now();
    let meter = BudgetMeter::new(plan.cell_budget());
    let trials = run_trials(&cfg.space(plan.trainer), plan, data, cfg.master_seed, cell_id)?;
    meter.try_consume(trials.iter().map(|t| t.forward_passes).sum())?;
    let mut result = match select_best(&trials) {
        Ok(best) => {
            let hidden = best.params.get("hidden_dim")? as usize;
            let mse = test_mse(plan, data, hidden, &best.theta)?;
            let mut r = CellResult::empty(plan, CellStatus::Ok);
            r.val_mse = Some(best.val_loss);
            r.hyperparameters = best.params.clone();
            if mse.is_finite() {
                r.test_mse = Some(mse);
            } else {
                r.status = CellStatus::Diverged;
                r.note = Some(format!("test loss {mse}"));
            }
            r
        }
        Err(_) => {
            let mut r = CellResult::empty(plan, CellStatus::Diverged);
            let losses: Vec<String> = trials.iter().map(|t| t.val_loss.to_string()).collect();
            r.note = Some(format!("no finite validation loss ({})", losses.join(", ")));
            r
        }
    };
    result.forward_passes = meter.used();
    result.wall_time_secs = started.elapsed().as_secs_f64();
    log::info!(
        "{}/{}: {:?} test {:?} in {:.1}s ({} passes)",
        plan.architecture.name(),
        plan.trainer.name(),
        result.status,
        result.test_mse,
        result.wall_time_secs,
        result.forward_passes
    );
    Ok(result)
}

/// Fills every (architecture, trainer) cell of the config. Budget parity is
/// checked before any training and again after every cell.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let plans = cfg.plans()?;
    let data = cfg.load_dataset()?;
    run_benchmark_on(cfg, &plans, &data)
}

pub fn run_benchmark_on(cfg: &ExperimentConfig, plans: &[CellPlan], data: &SequenceDataset) -> Result<ResultTable> {
    let cells = plans
        .par_iter()
        .map(|plan| {
            let id = cell_id(plan);
            run_cell(cfg, plan, id, data)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ResultTable { cells };
    table.check_budgets()?;
    if cfg.normalise {
        table.normalise();
    }
    Ok(table)
}

/// Stable id of a cell, independent of which cells a config selects.
pub fn cell_id(plan: &CellPlan) -> u64 {
    let a = CellKind::ALL.iter().position(|k| *k == plan.architecture).unwrap_or(0) as u64;
    let t = TrainerKind::ALL.iter().position(|k| *k == plan.trainer).unwrap_or(0) as u64;
    a * 16 + t
}
