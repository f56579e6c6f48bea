//! Recurrent cells evaluated directly on a flat parameter vector.
//!
//! Three cells are provided: a standard LSTM, the phased LSTM (an LSTM whose
//! cell and hidden updates are gated by a periodic per-unit time gate) and the
//! Fourier recurrent unit (a ReLU cell that summarises its history through
//! cosine-weighted accumulators over a fixed frequency grid). Each cell is
//! followed by an affine readout of its hidden state.
//!
//! Only the LSTM has an analytic gradient ([`lstm_bptt_gradient`]); the other
//! cells are trained gradient-free.

mod fru;
mod init;
mod layout;
mod lstm;
mod plstm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use init::glorot_orthogonal_init;
pub use layout::{Tensor, TensorSpec, WeightLayout};
pub use lstm::{lstm_bptt_gradient, BpttResult};
pub use plstm::time_gate_openness;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Plstm,
    Fru,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Lstm, CellKind::Plstm, CellKind::Fru];

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Plstm => "plstm",
            CellKind::Fru => "fru",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CellKind::Lstm => "LSTM",
            CellKind::Plstm => "P-LSTM",
            CellKind::Fru => "FRU",
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "plstm" | "p-lstm" => Ok(CellKind::Plstm),
            "fru" => Ok(CellKind::Fru),
            other => Err(Error::config(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Time-gate settings of the phased LSTM.
///
/// The learnable per-unit period, shift and open ratio are stored in the
/// parameter vector as offsets from these defaults: `period * exp(p)`, a
/// shift of `s` time units, and `sigmoid(r + logit(open_ratio))`. An all-zero
/// parameter vector therefore starts every unit at the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlstmParams {
    pub period: f64,
    pub open_ratio: f64,
    pub leak: f64,
    /// Pin the gate at 1 for every unit and step (the cell becomes an LSTM).
    #[serde(default)]
    pub force_open: bool,
}

impl Default for PlstmParams {
    fn default() -> Self {
        Self {
            period: 10.0,
            open_ratio: 0.2,
            leak: 1e-3,
            force_open: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FruParams {
    pub frequencies: Vec<f64>,
    /// Time scale `T` of the basis `cos(2 pi f t / T + phase) / T`.
    pub period: f64,
}

impl Default for FruParams {
    fn default() -> Self {
        Self {
            frequencies: vec![0.0, 1.0, 2.0, 5.0, 10.0],
            period: 400.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plstm: Option<PlstmParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fru: Option<FruParams>,
}

impl CellSpec {
    pub fn lstm(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Self {
            kind: CellKind::Lstm,
            input_dim,
            hidden_dim,
            output_dim,
            plstm: None,
            fru: None,
        }
    }

    pub fn plstm(input_dim: usize, hidden_dim: usize, output_dim: usize, params: PlstmParams) -> Self {
        Self {
            kind: CellKind::Plstm,
            plstm: Some(params),
            ..Self::lstm(input_dim, hidden_dim, output_dim)
        }
    }

    pub fn fru(input_dim: usize, hidden_dim: usize, output_dim: usize, params: FruParams) -> Self {
        Self {
            kind: CellKind::Fru,
            fru: Some(params),
            ..Self::lstm(input_dim, hidden_dim, output_dim)
        }
    }

    /// Spec of `kind` with default gate / frequency settings.
    pub fn of_kind(kind: CellKind, input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        match kind {
            CellKind::Lstm => Self::lstm(input_dim, hidden_dim, output_dim),
            CellKind::Plstm => Self::plstm(input_dim, hidden_dim, output_dim, PlstmParams::default()),
            CellKind::Fru => Self::fru(input_dim, hidden_dim, output_dim, FruParams::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::config("cell dimensions must be at least 1"));
        }
        match (self.kind, &self.plstm, &self.fru) {
            (CellKind::Fru, _, Some(f)) => {
                if f.frequencies.is_empty() {
                    return Err(Error::config("FRU needs at least one frequency"));
                }
                if !(f.period > 0.0) {
                    return Err(Error::config("FRU period must be positive"));
                }
            }
            (CellKind::Fru, _, None) => return Err(Error::config("FRU needs a frequency grid")),
            (_, _, Some(_)) => return Err(Error::config("frequency grid given for a non-FRU cell")),
            _ => {}
        }
        match (self.kind, &self.plstm) {
            (CellKind::Plstm, Some(p)) => {
                if !(p.period > 0.0) || !(p.open_ratio > 0.0 && p.open_ratio < 1.0) || p.leak < 0.0 {
                    return Err(Error::config("P-LSTM needs period > 0, open ratio in (0, 1), leak >= 0"));
                }
            }
            (CellKind::Plstm, None) => return Err(Error::config("P-LSTM needs time-gate settings")),
            (_, Some(_)) => return Err(Error::config("time-gate settings given for a non-P-LSTM cell")),
            _ => {}
        }
        Ok(())
    }

    pub fn layout(&self) -> WeightLayout {
        let (i, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        match self.kind {
            CellKind::Lstm => WeightLayout::new([
                ("w_x", vec![4 * h, i]),
                ("w_h", vec![4 * h, h]),
                ("b", vec![4 * h]),
                ("w_out", vec![o, h]),
                ("b_out", vec![o]),
            ]),
            CellKind::Plstm => WeightLayout::new([
                ("w_x", vec![4 * h, i]),
                ("w_h", vec![4 * h, h]),
                ("b", vec![4 * h]),
                ("w_out", vec![o, h]),
                ("b_out", vec![o]),
                ("log_period", vec![h]),
                ("shift", vec![h]),
                ("ratio_logit", vec![h]),
            ]),
            CellKind::Fru => {
                let f = self.fru.as_ref().map_or(0, |p| p.frequencies.len());
                WeightLayout::new([
                    ("w_x", vec![h, i]),
                    ("w_u", vec![h, f * h]),
                    ("b", vec![h]),
                    ("proj", vec![h, h]),
                    ("phase", vec![f]),
                    ("w_out", vec![o, h]),
                    ("b_out", vec![o]),
                ])
            }
        }
    }

    fn memory_len(&self) -> usize {
        match self.kind {
            CellKind::Lstm | CellKind::Plstm => self.hidden_dim,
            CellKind::Fru => self.hidden_dim * self.fru.as_ref().map_or(0, |p| p.frequencies.len()),
        }
    }
}

/// Recurrent state carried between steps.
///
/// `memory` is the cell vector for (P-)LSTM and the row-major
/// `frequencies x hidden` accumulator matrix for the FRU.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub hidden: Vec<f64>,
    pub memory: Vec<f64>,
    pub step_index: u64,
}

impl CellState {
    pub fn is_finite(&self) -> bool {
        self.hidden.iter().chain(&self.memory).all(|v| v.is_finite())
    }
}

/// A cell spec together with its weight layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: CellSpec,
    layout: WeightLayout,
}

impl Network {
    pub fn new(spec: CellSpec) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        Ok(Self { spec, layout })
    }

    pub fn spec(&self) -> &CellSpec {
        &self.spec
    }

    pub fn layout(&self) -> &WeightLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.layout.total_size()
    }

    pub fn zero_state(&self) -> CellState {
        CellState {
            hidden: vec![0.0; self.spec.hidden_dim],
            memory: vec![0.0; self.spec.memory_len()],
            step_index: 0,
        }
    }

    fn check_state(&self, state: &CellState) -> Result<()> {
        let expected = (self.spec.hidden_dim, self.spec.memory_len());
        if (state.hidden.len(), state.memory.len()) != expected {
            return Err(Error::DimensionMismatch {
                expected: expected.0 + expected.1,
                got: state.hidden.len() + state.memory.len(),
            });
        }
        Ok(())
    }

    /// Advances `state` in place by one step and writes the readout to `y`.
    /// `t` is the time fed to the P-LSTM gate and the FRU basis.
    fn step_in_place(&self, theta: &[f64], state: &mut CellState, x: &[f64], t: f64, y: &mut [f64]) -> Result<()> {
        match self.spec.kind {
            CellKind::Lstm => lstm::step(self, theta, state, x, y),
            CellKind::Plstm => plstm::step(self, theta, state, x, t, y),
            CellKind::Fru => fru::step(self, theta, state, x, t, y),
        }
        let step = state.step_index as usize;
        state.step_index += 1;
        if !state.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        Ok(())
    }

    /// Runs `rows` consecutive inputs (row-major, `input_dim` wide) from
    /// `state`, appending one readout per row to `out`. When `times` is given
    /// it supplies the time of each row; otherwise the state's step index is
    /// used.
    pub fn run(
        &self,
        theta: &[f64],
        state: &mut CellState,
        inputs: &[f64],
        times: Option<&[f64]>,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        self.layout.check(theta)?;
        self.check_state(state)?;
        let width = self.spec.input_dim;
        if !inputs.len().is_multiple_of(width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: inputs.len() % width,
            });
        }
        let rows = inputs.len() / width;
        if let Some(ts) = times {
            if ts.len() != rows {
                return Err(Error::DimensionMismatch { expected: rows, got: ts.len() });
            }
        }
        let o = self.spec.output_dim;
        out.reserve(rows * o);
        let mut y = vec![0.0; o];
        for (r, x) in inputs.chunks_exact(width).enumerate() {
            let t = times.map_or(state.step_index as f64, |ts| ts[r]);
            self.step_in_place(theta, state, x, t, &mut y)?;
            out.extend_from_slice(&y);
        }
        Ok(())
    }
}

/// One recursion step. Returns the new state and the readout.
pub fn forward_step(net: &Network, theta: &[f64], state: &CellState, x: &[f64], t: f64) -> Result<(CellState, Vec<f64>)> {
    net.layout.check(theta)?;
    net.check_state(state)?;
    if x.len() != net.spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: net.spec.input_dim,
            got: x.len(),
        });
    }
    let mut next = state.clone();
    let mut y = vec![0.0; net.spec.output_dim];
    net.step_in_place(theta, &mut next, x, t, &mut y)?;
    Ok((next, y))
}

/// Full untruncated pass from the zero state; one readout per input row.
pub fn forward_sequence(net: &Network, theta: &[f64], inputs: &[f64], times: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut state = net.zero_state();
    let mut out = Vec::new();
    net.run(theta, &mut state, inputs, times, &mut out)?;
    Ok(out)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out = w * v` for a row-major `rows x v.len()` matrix, accumulated into `out`.
pub(crate) fn matvec_add(w: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    if cols == 0 {
        return;
    }
    for (row, o) in w.chunks_exact(cols).zip(out.iter_mut()) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Affine readout `y = w_out h + b_out`.
pub(crate) fn readout(w_out: &[f64], b_out: &[f64], h: &[f64], y: &mut [f64]) {
    y.copy_from_slice(b_out);
    matvec_add(w_out, h, y);
}
