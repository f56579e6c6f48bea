//! Population-based training of recurrent forecasters.
//!
//! The crate trains small recurrent networks (LSTM, phased LSTM, Fourier
//! recurrent unit) whose weights live in one flat parameter vector. Three
//! trainers operate on that vector:
//!
//! * evolution strategies ([`optim::es`]),
//! * a particle swarm over network weights ([`optim::npso`]),
//! * an Adam + truncated-BPTT baseline for the LSTM ([`optim::sgd`]).
//!
//! Every trainer is charged in the same currency, one full feed-forward pass
//! over the training split ([`base::BudgetMeter`]), so that comparisons can be
//! made at equal computational budget. The [`harness`] module wires the pieces
//! into budget-matched random searches and result tables, and [`data`] turns
//! minute returns or a synthetic long-memory generator into forecasting
//! datasets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod base;
pub mod cells;
pub mod data;
pub mod error;
pub mod harness;
pub mod optim;

pub use error::{Error, Result};
