use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Dqn,
    Ddqn,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(Algorithm::Dqn),
            "ddqn" => Ok(Algorithm::Ddqn),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Dqn => "dqn",
            Algorithm::Ddqn => "ddqn",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    /// Discount factor applied to the bootstrap term.
    pub discount: f64,
    pub explore_start: f64,
    pub explore_end: f64,
    /// Real-environment steps over which exploration decays linearly.
    pub explore_decay_steps: u64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Train steps between hard target syncs.
    pub target_sync: u64,
    pub learning_rate: f64,
    /// Hidden widths of the Q-network.
    pub hidden: Vec<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            algorithm: Algorithm::Dqn,
            discount: 0.9,
            explore_start: 1.0,
            explore_end: 0.05,
            explore_decay_steps: 2000,
            replay_capacity: 50_000,
            batch_size: 64,
            target_sync: 200,
            learning_rate: 1e-3,
            hidden: vec![256, 256, 128, 128],
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config(format!(
                "discount must lie in [0, 1), got {}",
                self.discount
            )));
        }
        if !unit(self.explore_start) || !unit(self.explore_end) {
            return Err(Error::Config("exploration rates must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::Config(format!(
                "replay capacity {} must be at least the batch size {} (>= 1)",
                self.replay_capacity, self.batch_size
            )));
        }
        if self.target_sync == 0 {
            return Err(Error::Config("target_sync must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be >= 1".into()));
        }
        Ok(())
    }

    /// Exploration rate after `t` real-environment steps.
    pub fn explore_rate(&self, t: u64) -> f64 {
        if self.explore_decay_steps == 0 || t >= self.explore_decay_steps {
            return self.explore_end;
        }
        let frac = t as f64 / self.explore_decay_steps as f64;
        self.explore_start + (self.explore_end - self.explore_start) * frac
    }
}
