//! Downlink RAN slicing simulator.

mod codec;
mod config;
mod metrics;
mod radio;
mod reward;
mod scheduler;
mod simulator;
mod traffic;

pub use codec::ActionCodec;
pub use config::{ArrivalDist, EnvConfig, LogBase, SliceSpec};
pub use metrics::{compute_metrics, SliceMetrics};
pub use radio::{compute_snr, compute_user_rate, dbm_to_watts, path_gain, Cell, User};
pub use reward::{reward_threshold, shape_reward};
pub use scheduler::{simulate_window, PacketRecord, WindowOutcome};
pub use simulator::{Observation, SlicingEnv, StepOutcome};
pub use traffic::sample_arrivals;
