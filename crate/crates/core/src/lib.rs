//! Digital-twin-enhanced deep Q-learning for bandwidth allocation across RAN slices.
//!
//! The crate is organised bottom-up:
//!
//! * [`env`] simulates a single-cell downlink with per-slice round-robin scheduling
//!   and turns each allocation step into SLA satisfaction, spectrum efficiency,
//!   utility and a shaped reward.
//! * [`nn`] holds a small dense-network toolkit (MLP, LSTM, Adam) with analytic
//!   gradients and flat parameter access.
//! * [`agent`] builds DQN / double-DQN agents on top of it.
//! * [`twin`] is the learned virtual environment (LSTM state predictor plus an MLP
//!   reward predictor).
//! * [`orchestrator`] runs the two-loop twin-enhanced training procedure, its
//!   offline variant and policy distillation.
//! * [`analysis`] covers configuration, persistence, round aggregation, loss
//!   landscapes and plotting; [`cli`] wires it all into the `slicetwin` binary.

// Negated float comparisons are how NaN gets rejected during validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod analysis;
pub mod cli;
pub mod env;
pub mod error;
pub mod nn;
pub mod orchestrator;
pub mod par;
pub mod twin;

pub use error::{Error, Result};
