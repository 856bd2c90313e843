//! Value-based agents over the slicing MDP.

mod config;
mod dqn;
mod replay;

pub use config::{AgentConfig, Algorithm};
pub(crate) use dqn::stack_rows;
pub use dqn::{argmax, td_targets, DqnAgent};
pub use replay::{ReplayBuffer, Transition};
