//! Phased LSTM: an LSTM whose cell and hidden updates pass through a
//! periodic time gate with a rising phase, a falling phase, and a closed
//! phase that only leaks.

use super::{lstm, readout, sigmoid, CellState, Network, PlstmParams};

/// Openness of the time gate at phase `phi = ((t - shift) mod period) / period`.
pub fn time_gate_openness(t: f64, period: f64, shift: f64, open_ratio: f64, leak: f64) -> f64 {
    let phi = (t - shift).rem_euclid(period) / period;
    if phi < 0.5 * open_ratio {
        2.0 * phi / open_ratio
    } else if phi < open_ratio {
        2.0 - 2.0 * phi / open_ratio
    } else {
        leak * phi
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub(super) fn gate(net: &Network, theta: &[f64], params: &PlstmParams, t: f64) -> Vec<f64> {
    let h = net.spec().hidden_dim;
    if params.force_open {
        return vec![1.0; h];
    }
    let l = net.layout();
    let log_period = &theta[l.range("log_period")];
    let shift = &theta[l.range("shift")];
    let ratio = &theta[l.range("ratio_logit")];
    let base_logit = logit(params.open_ratio);
    (0..h)
        .map(|j| {
            let period = params.period * log_period[j].exp();
            let r = sigmoid(ratio[j] + base_logit);
            time_gate_openness(t, period, shift[j], r, params.leak)
        })
        .collect()
}

pub(super) fn step(net: &Network, theta: &[f64], state: &mut CellState, x: &[f64], t: f64, y: &mut [f64]) {
    let params = net.spec().plstm.as_ref().expect("validated P-LSTM spec");
    let k = gate(net, theta, params, t);
    let (c_cand, h_cand) = lstm::candidate(net, theta, state, x);
    for j in 0..k.len() {
        state.memory[j] = k[j] * c_cand[j] + (1.0 - k[j]) * state.memory[j];
        state.hidden[j] = k[j] * h_cand[j] + (1.0 - k[j]) * state.hidden[j];
    }
    let l = net.layout();
    readout(&theta[l.range("w_out")], &theta[l.range("b_out")], &state.hidden, y);
}
