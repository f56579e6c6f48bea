//! Fourier recurrent unit.
//!
//! ```text
//! h_t      = relu(W_x x_t + W_u vec(u_{t-1}) + b)
//! u_t[k]   = u_{t-1}[k] + cos(2 pi f_k t / T + phase_k) / T * (P h_t)
//! y_t      = W_out h_t + b_out
//! ```
//!
//! `u` holds one `hidden_dim` accumulator per frequency of the fixed grid.

use std::f64::consts::PI;

use super::{matvec_add, readout, CellState, Network};

pub(super) fn basis(frequency: f64, period: f64, phase: f64, t: f64) -> f64 {
    (2.0 * PI * frequency * t / period + phase).cos() / period
}

pub(super) fn step(net: &Network, theta: &[f64], state: &mut CellState, x: &[f64], t: f64, y: &mut [f64]) {
    let params = net.spec().fru.as_ref().expect("validated FRU spec");
    let l = net.layout();
    let nh = net.spec().hidden_dim;

    let mut h = theta[l.range("b")].to_vec();
    matvec_add(&theta[l.range("w_x")], x, &mut h);
    matvec_add(&theta[l.range("w_u")], &state.memory, &mut h);
    for v in h.iter_mut() {
        *v = v.max(0.0);
    }

    let mut summary = vec![0.0; nh];
    matvec_add(&theta[l.range("proj")], &h, &mut summary);
    let phase = &theta[l.range("phase")];
    for (k, (&f, acc)) in params.frequencies.iter().zip(state.memory.chunks_exact_mut(nh)).enumerate() {
        let w = basis(f, params.period, phase[k], t);
        for (a, s) in acc.iter_mut().zip(&summary) {
            *a += w * s;
        }
    }
    state.hidden = h;
    readout(&theta[l.range("w_out")], &theta[l.range("b_out")], &state.hidden, y);
}
