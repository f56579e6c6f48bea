use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::search::{CellPlan, SearchSpace};
use crate::cells::CellKind;
use crate::data::{build_dataset, compute_rv, generate_synthetic, load_csv, read_rv_csv, DatasetConfig, PriceColumn, SequenceDataset, SynthConfig};
use crate::error::{Error, Result};
use crate::optim::TrainerKind;

/// Where the bars come from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    #[default]
    Synthetic,
    /// Minute prices or returns, aggregated to bars.
    MinuteCsv,
    /// Precomputed `bar_ts,rv` file.
    RvCsv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchIterations {
    pub sgd: usize,
    pub es: usize,
    pub npso: usize,
}

impl Default for SearchIterations {
    fn default() -> Self {
        Self { sgd: 100, es: 20, npso: 20 }
    }
}

impl SearchIterations {
    pub fn get(&self, trainer: TrainerKind) -> usize {
        match trainer {
            TrainerKind::Sgd => self.sgd,
            TrainerKind::Es => self.es,
            TrainerKind::Npso => self.npso,
        }
    }
}

/// Everything a benchmark run depends on. Read from TOML; every field has a
/// default so partial files work.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub source: SourceKind,
    pub path: Option<PathBuf>,
    pub price_column: PriceColumn,
    pub synth: SynthConfig,
    pub dataset: DatasetConfig,
    pub architectures: Vec<CellKind>,
    pub trainers: Vec<TrainerKind>,
    /// Forward-pass cap of every (architecture, trainer) cell.
    pub budget: u64,
    pub search_iterations: SearchIterations,
    pub population: usize,
    /// Epoch cap of each SGD trial; derived from the budget when absent.
    pub sgd_max_epochs: Option<u64>,
    /// Iterations of each PBO trial; derived from the budget when absent.
    pub pbo_iterations: Option<u64>,
    pub truncation_length: usize,
    pub sgd_patience: usize,
    pub master_seed: u64,
    /// Divide test MSEs by the LSTM+SGD cell.
    pub normalise: bool,
    /// Per-trainer search-space replacements, keyed by trainer name.
    pub spaces: BTreeMap<TrainerKind, SearchSpace>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: SourceKind::Synthetic,
            path: None,
            price_column: PriceColumn::Auto,
            synth: SynthConfig::default(),
            dataset: DatasetConfig::default(),
            architectures: CellKind::ALL.to_vec(),
            trainers: TrainerKind::ALL.to_vec(),
            budget: 30_000,
            search_iterations: SearchIterations::default(),
            population: 30,
            sgd_max_epochs: None,
            pbo_iterations: None,
            truncation_length: 20,
            sgd_patience: 20,
            master_seed: 0,
            normalise: true,
            spaces: BTreeMap::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn space(&self, trainer: TrainerKind) -> SearchSpace {
        self.spaces.get(&trainer).cloned().unwrap_or_else(|| SearchSpace::default_for(trainer))
    }

    /// Checks everything except budget parity.
    pub fn validate(&self) -> Result<()> {
        if self.architectures.is_empty() || self.trainers.is_empty() {
            return Err(Error::config("need at least one architecture and one trainer"));
        }
        if self.budget == 0 || self.population == 0 || self.truncation_length == 0 {
            return Err(Error::config("budget, population and truncation length must be positive"));
        }
        for t in &self.trainers {
            if self.search_iterations.get(*t) == 0 {
                return Err(Error::config(format!("{} needs at least one search iteration", t.name())));
            }
            self.space(*t).validate()?;
        }
        if self.normalise && self.trainers.contains(&TrainerKind::Sgd) && !self.architectures.contains(&CellKind::Lstm) {
            return Err(Error::config("normalisation needs the LSTM architecture"));
        }
        if self.source != SourceKind::Synthetic && self.path.is_none() {
            return Err(Error::config("csv sources need `path`"));
        }
        Ok(())
    }

    /// The plan of every cell, in table order. Fails with
    /// [`Error::BudgetParity`] unless every cell can spend exactly the same
    /// budget.
    pub fn plans(&self) -> Result<Vec<CellPlan>> {
        self.validate()?;
        let mut plans = Vec::new();
        for &architecture in &self.architectures {
            for &trainer in &self.trainers {
                let trials = self.search_iterations.get(trainer) as u64;
                let parity = |what: String| Error::BudgetParity(format!("{}/{}: {what}", architecture.name(), trainer.name()));
                if !self.budget.is_multiple_of(trials) {
                    return Err(parity(format!("budget {} is not divisible by {trials} trials", self.budget)));
                }
                let share = self.budget / trials;
                match trainer {
                    TrainerKind::Sgd => {
                        if let Some(epochs) = self.sgd_max_epochs {
                            if epochs * trials != self.budget {
                                return Err(parity(format!("{trials} trials x {epochs} epochs != {}", self.budget)));
                            }
                        }
                    }
                    TrainerKind::Es | TrainerKind::Npso => {
                        let n = self.population as u64;
                        if !share.is_multiple_of(n) {
                            return Err(parity(format!("trial share {share} is not a multiple of population {n}")));
                        }
                        if let Some(k) = self.pbo_iterations {
                            if n * k * trials != self.budget {
                                return Err(parity(format!("{n} x {k} x {trials} != {}", self.budget)));
                            }
                        }
                    }
                }
                plans.push(CellPlan {
                    architecture,
                    trainer,
                    search_iterations: trials as usize,
                    trial_budget: share,
                    population: self.population,
                    truncation_length: self.truncation_length,
                    sgd_patience: self.sgd_patience,
                });
            }
        }
        Ok(plans)
    }

    pub fn load_dataset(&self) -> Result<SequenceDataset> {
        let rv = match self.source {
            SourceKind::Synthetic => generate_synthetic(&self.synth)?,
            SourceKind::MinuteCsv => {
                let file = BufReader::new(File::open(self.path.as_ref().expect("validated"))?);
                compute_rv(&load_csv(file, self.price_column)?, self.dataset.bar_minutes)?
            }
            SourceKind::RvCsv => {
                let file = BufReader::new(File::open(self.path.as_ref().expect("validated"))?);
                read_rv_csv(file, self.dataset.bar_minutes)?
            }
        };
        build_dataset(&rv, &self.dataset)
    }
}
