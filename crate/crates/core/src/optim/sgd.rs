//! Adam with stateful truncated BPTT for the LSTM.
//!
//! Each epoch runs over the training split from the zero state, cut into
//! consecutive windows of `truncation_length` steps. The state computed at
//! the end of one window is carried into the next, but gradients stop at the
//! window boundary. Gradients of `minibatch_size` consecutive windows are
//! averaged into one Adam update. One epoch costs one pass on the meter.

use serde::{Deserialize, Serialize};

use crate::base::{BudgetMeter, Objective, ParameterVector, SequenceObjective};
use crate::cells::{glorot_orthogonal_init, lstm_bptt_gradient, CellKind, Network};
use crate::data::{SequenceDataset, Split};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub truncation_length: usize,
    /// Windows per Adam update.
    pub minibatch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_weights: Option<ParameterVector>,
    /// Names of the tensors to update; all when `None`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trainable: Option<Vec<String>>,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 300,
            truncation_length: 20,
            minibatch_size: 1,
            patience: 20,
            initial_weights: None,
            trainable: None,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::config("Adam needs lr >= 0, betas in [0, 1), epsilon > 0"));
        }
        if self.truncation_length == 0 || self.minibatch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("truncation length, minibatch size and epochs must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdOutcome {
    /// Weights with the best validation loss seen (the initial weights
    /// included).
    pub theta: ParameterVector,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub diverged: bool,
    /// Validation loss after each epoch.
    pub history: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    fn apply(&mut self, cfg: &SgdConfig, mask: &[bool], grad: &[f64], theta: &mut [f64]) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for j in 0..theta.len() {
            if !mask[j] {
                continue;
            }
            self.m[j] = cfg.beta1 * self.m[j] + (1.0 - cfg.beta1) * grad[j];
            self.v[j] = cfg.beta2 * self.v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
            let m_hat = self.m[j] / c1;
            let v_hat = self.v[j] / c2;
            theta[j] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

fn trainable_mask(net: &Network, names: Option<&[String]>) -> Result<Vec<bool>> {
    let layout = net.layout();
    let Some(names) = names else {
        return Ok(vec![true; layout.total_size()]);
    };
    let mut mask = vec![false; layout.total_size()];
    for name in names {
        let spec = layout
            .get(name)
            .ok_or_else(|| Error::config(format!("unknown tensor {name:?}")))?;
        mask[spec.range()].fill(true);
    }
    Ok(mask)
}

/// Trains an LSTM on the training split. Stops after `max_epochs`, when the
/// meter refuses another epoch, after `patience` epochs without strict
/// validation improvement, or on divergence.
pub fn sgd_train(cfg: &SgdConfig, data: &SequenceDataset, net: &Network, meter: &BudgetMeter, seed: u64) -> Result<SgdOutcome> {
    cfg.validate()?;
    if net.spec().kind != CellKind::Lstm {
        return Err(Error::Unsupported(format!("gradient training of {}", net.spec().kind.name())));
    }
    let mut theta = match &cfg.initial_weights {
        Some(t) => {
            net.layout().check(t)?;
            t.clone()
        }
        None => glorot_orthogonal_init(net, seed),
    };
    let mask = trainable_mask(net, cfg.trainable.as_deref())?;
    let val_split = if data.range(Split::Validation).is_empty() {
        Split::Train
    } else {
        Split::Validation
    };
    let validation = SequenceObjective::new(data, net, val_split)?;
    let train = data.range(Split::Train);
    let nf = data.n_features;

    let mut best_val = validation.loss(&theta);
    let mut best = theta.clone();
    let mut adam = Adam::new(theta.len());
    let mut history = Vec::new();
    let mut stale = 0;
    let mut diverged = false;
    let mut epochs_run = 0;

    'epochs: for _ in 0..cfg.max_epochs {
        if meter.try_consume(1).is_err() {
            break;
        }
        epochs_run += 1;
        let mut state = net.zero_state();
        let mut grad_sum = vec![0.0; theta.len()];
        let mut steps_in_batch = 0usize;
        let mut windows_in_batch = 0usize;
        let mut start = train.start;
        while start < train.end {
            let end = (start + cfg.truncation_length).min(train.end);
            let window = lstm_bptt_gradient(
                net,
                &theta,
                &data.features[start * nf..end * nf],
                &data.targets[start..end],
                &state,
            );
            let window = match window {
                Ok(w) if w.gradient.iter().all(|g| g.is_finite()) => w,
                _ => {
                    diverged = true;
                    break 'epochs;
                }
            };
            let n = (end - start) as f64;
            for (s, g) in grad_sum.iter_mut().zip(&window.gradient) {
                *s += n * g;
            }
            steps_in_batch += end - start;
            windows_in_batch += 1;
            state = window.final_state;
            start = end;
            if windows_in_batch == cfg.minibatch_size || start == train.end {
                for s in grad_sum.iter_mut() {
                    *s /= steps_in_batch as f64;
                }
                adam.apply(cfg, &mask, &grad_sum, &mut theta);
                grad_sum.fill(0.0);
                steps_in_batch = 0;
                windows_in_batch = 0;
            }
        }
        let val = validation.loss(&theta);
        history.push(val);
        if !val.is_finite() {
            diverged = true;
            break;
        }
        if val < best_val {
            best_val = val;
            best.copy_from_slice(&theta);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    Ok(SgdOutcome {
        theta: best,
        best_val_loss: best_val,
        epochs_run,
        diverged,
        history,
    })
}
