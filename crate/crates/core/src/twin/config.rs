use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwinConfig {
    /// LSTM hidden width of the state predictor.
    pub hidden: usize,
    /// Sequence window: the current step plus up to `window - 1` predecessors.
    pub window: usize,
    /// Passes over the training split per calibration.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Hidden widths of the reward predictor.
    pub reward_hidden: Vec<usize>,
    /// Rollouts are re-seeded from a real state after this many twin steps.
    pub rollout_reset_period: usize,
    pub holdout_fraction: f64,
}

impl Default for TwinConfig {
    fn default() -> Self {
        TwinConfig {
            hidden: 64,
            window: 8,
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            reward_hidden: vec![64, 64],
            rollout_reset_period: 16,
            holdout_fraction: 0.2,
        }
    }
}

impl TwinConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0
            || self.window == 0
            || self.batch_size == 0
            || self.rollout_reset_period == 0
        {
            return Err(Error::Config(
                "twin hidden, window, batch_size and rollout_reset_period must be >= 1".into(),
            ));
        }
        if self.reward_hidden.contains(&0) {
            return Err(Error::Config(
                "twin reward_hidden widths must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("twin learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config("holdout_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}
