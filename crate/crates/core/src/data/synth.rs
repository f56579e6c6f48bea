use std::f64::consts::PI;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::RvSeries;
use crate::base::{Purpose, RngStream};
use crate::error::{Error, Result};

/// Log-variance process
///
/// ```text
/// h_t = c + phi h_{t-1} + gamma h_{t-D} + s sin(2 pi (t mod P) / P) + sigma e_t
/// ```
///
/// with `e_t` standard normal and `rv_t = exp(h_t)`, laid out as `P` bars of
/// `bar_minutes` per day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub length: usize,
    pub seasonal_period: usize,
    pub long_lag: usize,
    pub intercept: f64,
    pub persistence: f64,
    pub long_weight: f64,
    pub seasonal_amplitude: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub bar_minutes: u32,
    /// Minimum population R^2 gain the lag-D regressor must add over the
    /// lag-1 regressor whenever `long_weight != 0`.
    pub min_lag_r2_gain: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            length: 4000,
            seasonal_period: 13,
            long_lag: 40,
            intercept: -1.0,
            persistence: 0.1,
            long_weight: 0.8,
            seasonal_amplitude: 0.3,
            noise_std: 0.4,
            seed: 0,
            bar_minutes: 30,
            min_lag_r2_gain: 0.05,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let sum = self.persistence.abs() + self.long_weight.abs();
        if sum >= 1.0 {
            return Err(Error::NonStationary { sum });
        }
        if self.seasonal_period == 0 || self.long_lag < 2 {
            return Err(Error::config("seasonal period must be >= 1 and long lag >= 2"));
        }
        let need = 10 * self.seasonal_period.max(self.long_lag);
        if self.length < need {
            return Err(Error::InsufficientLength {
                len: self.length,
                lags: need,
            });
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::config("noise std must be non-negative"));
        }
        Ok(())
    }

    pub fn stationary_mean(&self) -> f64 {
        self.intercept / (1.0 - self.persistence - self.long_weight)
    }

    pub fn season(&self, t: usize) -> f64 {
        let p = self.seasonal_period as f64;
        self.seasonal_amplitude * (2.0 * PI * (t % self.seasonal_period) as f64 / p).sin()
    }

    /// Autocovariances `g(0..=D)` of the stochastic (non-seasonal) part,
    /// from the Yule-Walker equations of the two-lag autoregression.
    pub fn autocovariances(&self) -> Vec<f64> {
        let d = self.long_lag;
        let (phi, gamma) = (self.persistence, self.long_weight);
        let mut a = DMatrix::<f64>::identity(d + 1, d + 1);
        let mut rhs = DVector::<f64>::zeros(d + 1);
        rhs[0] = self.noise_std * self.noise_std;
        for k in 0..=d {
            a[(k, k.abs_diff(1))] -= phi;
            a[(k, k.abs_diff(d))] -= gamma;
        }
        a.lu().solve(&rhs).map(|v| v.iter().copied().collect()).unwrap_or_else(|| vec![f64::NAN; d + 1])
    }

    /// Population R^2 gained by adding `h_{t-D}` to a predictor using
    /// `h_{t-1}` only.
    pub fn lag_r2_gain(&self) -> f64 {
        let g = self.autocovariances();
        if g[0] <= 0.0 {
            return 0.0;
        }
        let full = 1.0 - self.noise_std * self.noise_std / g[0];
        let rho1 = g[1] / g[0];
        full - rho1 * rho1
    }

    /// Stationary variance of the stochastic part of `h`.
    pub fn stationary_variance(&self) -> f64 {
        self.autocovariances()[0]
    }
}

/// Simulated log-variance path of `cfg.length` bars after a burn-in of
/// `10 D` bars started at the stationary mean.
pub fn simulate_log_variance(cfg: &SynthConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if cfg.long_weight != 0.0 {
        let gain = cfg.lag_r2_gain();
        if gain < cfg.min_lag_r2_gain {
            return Err(Error::config(format!(
                "lag-{} term adds R^2 {gain:.4}, below the floor {}",
                cfg.long_lag, cfg.min_lag_r2_gain
            )));
        }
    }
    let burn = 10 * cfg.long_lag;
    let total = burn + cfg.length;
    let period = cfg.seasonal_period;
    let mut rng = RngStream::new(cfg.seed, 0, 0, Purpose::Synthetic).rng();
    let mu = cfg.stationary_mean();
    let mut h = vec![mu; total];
    for t in cfg.long_lag..total {
        let slot = (t + period - burn % period) % period;
        let e: f64 = rng.sample(StandardNormal);
        h[t] = cfg.intercept
            + cfg.persistence * h[t - 1]
            + cfg.long_weight * h[t - cfg.long_lag]
            + cfg.season(slot)
            + cfg.noise_std * e;
    }
    Ok(h.split_off(burn))
}

/// Synthetic realized-variance bars, `seasonal_period` bars per day starting
/// 08:00 on 2000-01-04.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<RvSeries> {
    let h = simulate_log_variance(cfg)?;
    let origin = NaiveDate::from_ymd_opt(2000, 1, 4)
        .and_then(|d| d.and_hms_opt(8, 0, 0))
        .expect("valid origin");
    let p = cfg.seasonal_period;
    let stamps = (0..h.len())
        .map(|t| {
            origin
                + chrono::Duration::days((t / p) as i64)
                + chrono::Duration::minutes(i64::from(cfg.bar_minutes) * (t % p) as i64)
        })
        .collect();
    Ok(RvSeries {
        bar_timestamps: stamps,
        rv: h.iter().map(|v| v.exp()).collect(),
        bar_of_day: (0..h.len()).map(|t| (t % p) as u32).collect(),
    })
}
