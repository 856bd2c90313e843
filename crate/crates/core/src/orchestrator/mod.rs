//! Training procedures: the twin-enhanced two-loop algorithm, its offline
//! variant, and policy distillation into small students.

mod algorithm;
mod config;
mod distill;
mod eval;
mod offline;

pub use algorithm::{
    collect_data, dataset_from_records, derive_seed, empower, run_algorithm1, run_baseline,
    train_agent2_in_twin, train_agent_real, RunLedger, RunOutput,
};
pub use config::{OrchestratorConfig, RunConfig};
pub use distill::{agreement, distill, state_pool, DistillOutput, Student};
pub use eval::{evaluate_policy, evaluate_random, rollout, summarize, EvalSummary, EVAL_STREAM};
pub use offline::{run_offline, OfflineOutput};
