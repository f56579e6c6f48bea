//! Realized-variance pipeline: minute returns to 30-minute realized variance
//! bars, CSV ingestion and caching, lagged forecasting datasets with
//! chronological splits, and a synthetic long-memory log-variance generator.

mod csv_io;
mod dataset;
mod rv;
mod synth;

pub use csv_io::{load_csv, read_rv_csv, write_returns_csv, write_rv_csv, PriceColumn};
pub use dataset::{build_dataset, DatasetConfig, SequenceDataset, Split, TransformStats};
pub use rv::{compute_rv, ReturnSeries, RvSeries};
pub use synth::{generate_synthetic, simulate_log_variance, SynthConfig};
