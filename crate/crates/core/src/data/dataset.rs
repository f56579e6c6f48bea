use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::RvSeries;
use crate::base::TargetTransform;
use crate::error::{Error, Result};

/// Floor applied before taking logs so that empty-variance bars stay finite.
const LOG_FLOOR: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Location and scale of the (log-)transformed series over the values seen
/// by training features. Identity/log transforms record them without applying
/// them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub lags: usize,
    pub transform: TargetTransform,
    pub split: (f64, f64, f64),
    /// Append the scaled bar-of-day slot as an extra feature.
    pub calendar: bool,
    /// Feed bar timestamps (in units of `bar_minutes`) as cell time instead
    /// of the step index.
    pub timestamps_as_time: bool,
    pub bar_minutes: u32,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            lags: 1,
            transform: TargetTransform::StandardizedLog,
            split: (0.6, 0.2, 0.2),
            calendar: true,
            timestamps_as_time: false,
            bar_minutes: 30,
        }
    }
}

/// Feature matrix and one-step-ahead targets with contiguous chronological
/// splits `[0, train_end)`, `[train_end, val_end)`, `[val_end, len)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceDataset {
    pub features: Vec<f64>,
    pub n_features: usize,
    pub targets: Vec<f64>,
    pub times: Option<Vec<f64>>,
    pub train_end: usize,
    pub val_end: usize,
    pub transform: TargetTransform,
    pub stats: TransformStats,
}

impl SequenceDataset {
    /// Dataset from raw rows; used for hand-built tasks.
    pub fn from_parts(features: Vec<f64>, n_features: usize, targets: Vec<f64>, train_end: usize, val_end: usize) -> Result<Self> {
        if n_features == 0 || features.len() != targets.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: targets.len() * n_features,
                got: features.len(),
            });
        }
        if targets.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !(0 < train_end && train_end <= val_end && val_end <= targets.len()) {
            return Err(Error::config(format!(
                "split bounds {train_end}/{val_end} invalid for {} rows",
                targets.len()
            )));
        }
        Ok(Self {
            features,
            n_features,
            targets,
            times: None,
            train_end,
            val_end,
            transform: TargetTransform::Identity,
            stats: TransformStats { mean: 0.0, std: 1.0 },
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn range(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => 0..self.train_end,
            Split::Validation => self.train_end..self.val_end,
            Split::Test => self.val_end..self.len(),
        }
    }

    /// Input rows `[0, end)`, row-major.
    pub fn inputs_until(&self, end: usize) -> &[f64] {
        &self.features[..end * self.n_features]
    }

    pub fn times_until(&self, end: usize) -> Option<&[f64]> {
        self.times.as_deref().map(|t| &t[..end])
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.features[t * self.n_features..(t + 1) * self.n_features]
    }
}

fn split_sizes(rows: usize, (a, b, c): (f64, f64, f64)) -> Result<(usize, usize)> {
    if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::config("split fractions must be positive and sum to 1"));
    }
    let train = (a * rows as f64).round() as usize;
    let val = (b * rows as f64).round() as usize;
    if train == 0 || val == 0 || train + val >= rows {
        return Err(Error::InsufficientLength { len: rows, lags: 0 });
    }
    Ok((train, train + val))
}

/// Lagged one-step-ahead dataset.
///
/// Row `t` holds the transformed values at series positions
/// `t .. t + lags` (oldest first), optionally the scaled bar-of-day slot of
/// the newest position, and the target at position `t + lags`. Transform
/// statistics come from the series positions used by training features only.
pub fn build_dataset(rv: &RvSeries, cfg: &DatasetConfig) -> Result<SequenceDataset> {
    let lags = cfg.lags;
    if lags == 0 {
        return Err(Error::config("lags must be at least 1"));
    }
    let n = rv.len();
    if n <= lags + 1 {
        return Err(Error::InsufficientLength { len: n, lags });
    }
    if let Some(bad) = rv.rv.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::config(format!("realized variance at {bad} is negative or not finite")));
    }
    let rows = n - lags;
    let (train_end, val_end) = split_sizes(rows, cfg.split)?;

    let raw: Vec<f64> = match cfg.transform {
        TargetTransform::Identity => rv.rv.clone(),
        TargetTransform::Log | TargetTransform::StandardizedLog => rv.rv.iter().map(|v| v.max(LOG_FLOOR).ln()).collect(),
    };
    let seen = &raw[..train_end + lags - 1];
    let mean = seen.iter().sum::<f64>() / seen.len() as f64;
    let var = seen.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / seen.len() as f64;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    let z: Vec<f64> = match cfg.transform {
        TargetTransform::StandardizedLog => raw.iter().map(|v| (v - mean) / std).collect(),
        _ => raw,
    };

    let day_scale = rv.bar_of_day[..train_end + lags - 1].iter().copied().max().unwrap_or(0) as f64 + 1.0;
    let n_features = lags + usize::from(cfg.calendar);
    let mut features = Vec::with_capacity(rows * n_features);
    let mut targets = Vec::with_capacity(rows);
    for t in 0..rows {
        features.extend_from_slice(&z[t..t + lags]);
        if cfg.calendar {
            features.push(f64::from(rv.bar_of_day[t + lags - 1]) / day_scale);
        }
        targets.push(z[t + lags]);
    }
    let times = cfg.timestamps_as_time.then(|| {
        let origin = rv.bar_timestamps[0];
        let unit = f64::from(cfg.bar_minutes.max(1));
        (0..rows)
            .map(|t| (rv.bar_timestamps[t + lags - 1] - origin).num_minutes() as f64 / unit)
            .collect()
    });

    Ok(SequenceDataset {
        features,
        n_features,
        targets,
        times,
        train_end,
        val_end,
        transform: cfg.transform,
        stats: TransformStats { mean, std },
    })
}
