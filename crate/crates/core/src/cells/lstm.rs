//! Standard LSTM (input, forget, candidate, output; gate order `i, f, g, o`
//! in the stacked `w_x`, `w_h`, `b` tensors) and its truncated BPTT gradient.

use super::{matvec_add, readout, sigmoid, CellKind, CellState, Network};
use crate::error::{Error, Result};

/// Gate activations of one step, each `hidden_dim` long.
pub(super) struct Activations {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
}

pub(super) fn activations(net: &Network, theta: &[f64], h_prev: &[f64], x: &[f64]) -> Activations {
    let l = net.layout();
    let h = net.spec().hidden_dim;
    let mut pre = theta[l.range("b")].to_vec();
    matvec_add(&theta[l.range("w_x")], x, &mut pre);
    matvec_add(&theta[l.range("w_h")], h_prev, &mut pre);
    Activations {
        i: pre[..h].iter().map(|&a| sigmoid(a)).collect(),
        f: pre[h..2 * h].iter().map(|&a| sigmoid(a)).collect(),
        g: pre[2 * h..3 * h].iter().map(|&a| a.tanh()).collect(),
        o: pre[3 * h..].iter().map(|&a| sigmoid(a)).collect(),
    }
}

/// Candidate `(c, h)` of a plain LSTM update from `(c_prev, h_prev)`.
pub(super) fn candidate(net: &Network, theta: &[f64], state: &CellState, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let a = activations(net, theta, &state.hidden, x);
    let c: Vec<f64> = (0..a.i.len())
        .map(|j| a.f[j] * state.memory[j] + a.i[j] * a.g[j])
        .collect();
    let h = c.iter().zip(&a.o).map(|(c, o)| o * c.tanh()).collect();
    (c, h)
}

pub(super) fn step(net: &Network, theta: &[f64], state: &mut CellState, x: &[f64], y: &mut [f64]) {
    let (c, h) = candidate(net, theta, state, x);
    state.memory = c;
    state.hidden = h;
    let l = net.layout();
    readout(&theta[l.range("w_out")], &theta[l.range("b_out")], &state.hidden, y);
}

#[derive(Clone, Debug)]
pub struct BpttResult {
    /// Mean squared error over the window (all steps and outputs).
    pub loss: f64,
    /// Gradient of `loss` with respect to the flat parameter vector.
    pub gradient: Vec<f64>,
    /// State after the last step of the window, for carrying forward.
    pub final_state: CellState,
}

struct Tape {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    act: Activations,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

/// Exact gradient of the window MSE for an LSTM, unrolled over the window
/// only. `carried` is the state entering the window and is treated as a
/// constant, so no gradient flows past the window start.
///
/// `inputs` is row-major `n x input_dim`; `targets` is row-major
/// `n x output_dim`.
pub fn lstm_bptt_gradient(net: &Network, theta: &[f64], inputs: &[f64], targets: &[f64], carried: &CellState) -> Result<BpttResult> {
    if net.spec().kind != CellKind::Lstm {
        return Err(Error::Unsupported(format!("analytic gradients for {}", net.spec().kind.name())));
    }
    let l = net.layout();
    l.check(theta)?;
    net.check_state(carried)?;
    let (ni, nh, no) = (net.spec().input_dim, net.spec().hidden_dim, net.spec().output_dim);
    if inputs.is_empty() || !inputs.len().is_multiple_of(ni) || targets.len() != inputs.len() / ni * no {
        return Err(Error::DimensionMismatch {
            expected: inputs.len() / ni.max(1) * no,
            got: targets.len(),
        });
    }
    let n = inputs.len() / ni;
    let w_h = &theta[l.range("w_h")];
    let w_out = &theta[l.range("w_out")];
    let b_out = &theta[l.range("b_out")];

    let mut state = carried.clone();
    let mut tape = Vec::with_capacity(n);
    let mut residuals = vec![0.0; n * no];
    let mut loss = 0.0;
    let mut y = vec![0.0; no];
    for (t, x) in inputs.chunks_exact(ni).enumerate() {
        let act = activations(net, theta, &state.hidden, x);
        let c: Vec<f64> = (0..nh).map(|j| act.f[j] * state.memory[j] + act.i[j] * act.g[j]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = tanh_c.iter().zip(&act.o).map(|(tc, o)| o * tc).collect();
        readout(w_out, b_out, &h, &mut y);
        for k in 0..no {
            let r = y[k] - targets[t * no + k];
            residuals[t * no + k] = r;
            loss += r * r;
        }
        tape.push(Tape {
            x: x.to_vec(),
            h_prev: std::mem::replace(&mut state.hidden, h.clone()),
            c_prev: std::mem::replace(&mut state.memory, c),
            act,
            tanh_c,
            h,
        });
        state.step_index += 1;
        if !state.is_finite() || !loss.is_finite() {
            return Err(Error::Divergence { step: state.step_index as usize - 1 });
        }
    }
    let scale = 1.0 / (n * no) as f64;
    loss *= scale;

    let mut grad = vec![0.0; theta.len()];
    let (r_wx, r_wh, r_b) = (l.range("w_x"), l.range("w_h"), l.range("b"));
    let (r_wo, r_bo) = (l.range("w_out"), l.range("b_out"));
    let mut dh_next = vec![0.0; nh];
    let mut dc_next = vec![0.0; nh];
    let mut da = vec![0.0; 4 * nh];
    for (t, tp) in tape.iter().enumerate().rev() {
        let mut dh = dh_next.clone();
        for k in 0..no {
            let dy = 2.0 * residuals[t * no + k] * scale;
            grad[r_bo.start + k] += dy;
            for j in 0..nh {
                grad[r_wo.start + k * nh + j] += dy * tp.h[j];
                dh[j] += dy * w_out[k * nh + j];
            }
        }
        let a = &tp.act;
        for j in 0..nh {
            let d_o = dh[j] * tp.tanh_c[j];
            let dc = dh[j] * a.o[j] * (1.0 - tp.tanh_c[j] * tp.tanh_c[j]) + dc_next[j];
            let di = dc * a.g[j];
            let dg = dc * a.i[j];
            let df = dc * tp.c_prev[j];
            dc_next[j] = dc * a.f[j];
            da[j] = di * a.i[j] * (1.0 - a.i[j]);
            da[nh + j] = df * a.f[j] * (1.0 - a.f[j]);
            da[2 * nh + j] = dg * (1.0 - a.g[j] * a.g[j]);
            da[3 * nh + j] = d_o * a.o[j] * (1.0 - a.o[j]);
        }
        for (r, &d) in da.iter().enumerate() {
            grad[r_b.start + r] += d;
            for (c, &xv) in tp.x.iter().enumerate() {
                grad[r_wx.start + r * ni + c] += d * xv;
            }
            for (c, &hv) in tp.h_prev.iter().enumerate() {
                grad[r_wh.start + r * nh + c] += d * hv;
            }
        }
        dh_next.fill(0.0);
        for (r, &d) in da.iter().enumerate() {
            for c in 0..nh {
                dh_next[c] += d * w_h[r * nh + c];
            }
        }
    }

    Ok(BpttResult {
        loss,
        gradient: grad,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::{forward_sequence, CellSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Scalar re-derivation of a hidden_dim = 1, input_dim = 1 LSTM step with
    /// its readout, written out term by term.
    fn scalar_lstm(theta: &[f64], xs: &[f64]) -> Vec<f64> {
        // layout: w_x[4], w_h[4], b[4], w_out[1], b_out[1]
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let (mut h, mut c) = (0.0, 0.0);
        let mut ys = Vec::new();
        for &x in xs {
            let i = s(theta[0] * x + theta[4] * h + theta[8]);
            let f = s(theta[1] * x + theta[5] * h + theta[9]);
            let g = (theta[2] * x + theta[6] * h + theta[10]).tanh();
            let o = s(theta[3] * x + theta[7] * h + theta[11]);
            c = f * c + i * g;
            h = o * c.tanh();
            ys.push(theta[12] * h + theta[13]);
        }
        ys
    }

    #[test]
    fn matches_scalar_recursion() {
        let net = Network::new(CellSpec::lstm(1, 1, 1)).unwrap();
        assert_eq!(net.num_params(), 14);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta: Vec<f64> = (0..14).map(|_| rng.random_range(-1.5..1.5)).collect();
        let xs = [0.4, -1.2, 0.9, 0.05, 2.0];
        let got = forward_sequence(&net, &theta, &xs, None).unwrap();
        for (a, b) in got.iter().zip(scalar_lstm(&theta, &xs)) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let net = Network::new(CellSpec::lstm(2, 3, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta: Vec<f64> = (0..net.num_params()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let inputs: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets = forward_sequence(&net, &theta, &inputs, None).unwrap();
        let res = lstm_bptt_gradient(&net, &theta, &inputs, &targets, &net.zero_state()).unwrap();
        assert_eq!(res.loss, 0.0);
        assert!(res.gradient.iter().all(|&g| g == 0.0));
    }

    /// Window of one step, hidden_dim 1, zero carried state: the derivative
    /// is written out by hand with the chain rule.
    #[test]
    fn single_step_gradient_by_hand() {
        let net = Network::new(CellSpec::lstm(1, 1, 1)).unwrap();
        let theta = [0.3, -0.2, 0.5, 0.1, 0.4, 0.7, -0.3, 0.2, 0.05, 0.6, -0.1, 0.15, 1.3, -0.4];
        let (x, target) = (0.8, 0.25);
        let res = lstm_bptt_gradient(&net, &theta, &[x], &[target], &net.zero_state()).unwrap();

        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        // h_prev = c_prev = 0, so recurrent weights see a zero input
        let i = s(theta[0] * x + theta[8]);
        let g = (theta[2] * x + theta[10]).tanh();
        let o = s(theta[3] * x + theta[11]);
        let c = i * g;
        let h = o * c.tanh();
        let y = theta[12] * h + theta[13];
        let dy = 2.0 * (y - target);
        let dh = dy * theta[12];
        let dc = dh * o * (1.0 - c.tanh().powi(2));
        let da_i = dc * g * i * (1.0 - i);
        let da_g = dc * i * (1.0 - g * g);
        let da_o = dh * c.tanh() * o * (1.0 - o);
        let mut expect = [0.0; 14];
        expect[0] = da_i * x;
        expect[2] = da_g * x;
        expect[3] = da_o * x;
        expect[8] = da_i;
        expect[10] = da_g;
        expect[11] = da_o;
        expect[12] = dy * h;
        expect[13] = dy;
        assert!((res.loss - (y - target).powi(2)).abs() < 1e-15);
        for (k, (a, b)) in res.gradient.iter().zip(expect).enumerate() {
            assert!((a - b).abs() < 1e-14, "coord {k}: {a} vs {b}");
        }
    }

    #[test]
    fn rejects_other_cells() {
        let net = Network::new(CellSpec::of_kind(CellKind::Fru, 1, 2, 1)).unwrap();
        let theta = vec![0.0; net.num_params()];
        assert!(matches!(
            lstm_bptt_gradient(&net, &theta, &[1.0], &[0.0], &net.zero_state()),
            Err(Error::Unsupported(_))
        ));
    }
}
