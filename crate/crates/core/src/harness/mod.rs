//! Experiment runner: budget-matched random search over (architecture,
//! trainer) cells, result tables, and the long-memory acceptance run.

mod acceptance;
mod benchmark;
mod config;
mod report;
mod search;

pub use acceptance::{long_memory_acceptance, AcceptanceConfig, AcceptanceReport};
pub use benchmark::{cell_id, run_benchmark, run_benchmark_on, run_cell, CellResult, CellStatus, ResultTable};
pub use config::{ExperimentConfig, SearchIterations, SourceKind};
pub use report::{emit_results, read_results_csv, read_results_json, render_markdown, Format};
pub use search::{random_search, run_trials, select_best, train_trial, trial_seed, Axis, CellPlan, Hyperparams, Scale, SearchOutcome, SearchSpace, TrialOutcome};
