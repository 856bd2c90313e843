use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::env::EnvConfig;
use crate::twin::TwinConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrchestratorConfig {
    /// Outer iterations.
    pub iterations: usize,
    /// Agent 2 steps inside the twin per iteration.
    pub twin_steps: usize,
    /// Agent 1 steps in the real environment per iteration.
    pub real_steps: usize,
    /// Real transitions collected for twin calibration per iteration.
    pub collect_steps: usize,
    /// Weight kept on Agent 1 when blending in Agent 2.
    pub zeta: f64,
    /// Exploration rate of Agent 2 inside the twin.
    pub twin_explore: f64,
    /// Whether the twin phases run at all.
    pub twin: bool,
    /// Offline proximity penalty weight.
    pub upsilon: f64,
    pub offline_batch: usize,
    pub offline_epochs: usize,
    /// States drawn from the replay buffer for distillation.
    pub distill_pool: usize,
    /// Student optimizer updates.
    pub distill_budget: usize,
    pub distill_batch: usize,
    pub distill_lr: f64,
    pub student_hidden: Vec<usize>,
    /// Real interactions per reporting round.
    pub round_size: usize,
    /// Rounds of greedy evaluation.
    pub eval_rounds: usize,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            iterations: 20,
            twin_steps: 2000,
            real_steps: 200,
            collect_steps: 400,
            zeta: 0.3,
            twin_explore: 0.05,
            twin: true,
            upsilon: 1e-3,
            offline_batch: 64,
            offline_epochs: 200,
            distill_pool: 2000,
            distill_budget: 10_000,
            distill_batch: 64,
            distill_lr: 1e-3,
            student_hidden: vec![16, 16],
            round_size: 200,
            eval_rounds: 20,
        }
    }
}

impl OrchestratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0
            || self.real_steps == 0 && self.twin_steps == 0 && self.collect_steps == 0
        {
            return Err(Error::Config(
                "iterations must be >= 1 and some phase must take steps".into(),
            ));
        }
        if self.twin && self.collect_steps == 0 {
            return Err(Error::Config("twin mode needs collect_steps >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.zeta) || !(0.0..=1.0).contains(&self.twin_explore) {
            return Err(Error::Config(
                "zeta and twin_explore must lie in [0, 1]".into(),
            ));
        }
        if !(self.upsilon >= 0.0) {
            return Err(Error::Config("upsilon must be >= 0".into()));
        }
        if self.round_size == 0 || self.offline_batch == 0 || self.distill_batch == 0 {
            return Err(Error::Config(
                "round_size and batch sizes must be >= 1".into(),
            ));
        }
        if !(self.distill_lr > 0.0) || self.student_hidden.contains(&0) {
            return Err(Error::Config(
                "distillation lr must be positive and widths >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Everything one training run needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub twin: TwinConfig,
    pub orchestrator: OrchestratorConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        self.twin.validate()?;
        self.orchestrator.validate()
    }
}

impl RunConfig {
    /// Desk-scale experiment: 171 actions, compact networks, 6000 real
    /// interactions per twin-enhanced run.
    pub fn small(seed: u64) -> Self {
        RunConfig {
            seed,
            env: EnvConfig::small(),
            agent: AgentConfig {
                discount: 0.5,
                explore_decay_steps: 1000,
                batch_size: 32,
                target_sync: 100,
                learning_rate: 5e-4,
                hidden: vec![64, 64],
                ..AgentConfig::default()
            },
            twin: TwinConfig {
                hidden: 32,
                window: 4,
                epochs: 20,
                reward_hidden: vec![32, 32],
                ..TwinConfig::default()
            },
            orchestrator: OrchestratorConfig {
                iterations: 15,
                twin_steps: 1000,
                real_steps: 200,
                collect_steps: 200,
                ..OrchestratorConfig::default()
            },
        }
    }
}
