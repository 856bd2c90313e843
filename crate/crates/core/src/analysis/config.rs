use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::env::EnvConfig;
use crate::orchestrator::{OrchestratorConfig, RunConfig};
use crate::twin::TwinConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    /// Transitions in the landscape evaluation batch.
    pub landscape_batch: usize,
    /// Steps of greedy evaluation after training.
    pub eval_steps: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            lambda_min: -1.0,
            lambda_max: 1.0,
            points: 41,
            landscape_batch: 256,
            eval_steps: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub out_dir: PathBuf,
    /// Also write every real transition to `transitions.jsonl`.
    pub write_transitions: bool,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            out_dir: PathBuf::from("runs/default"),
            write_transitions: true,
        }
    }
}

/// Top-level experiment file. Every key has a default; unknown keys are errors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub twin: TwinConfig,
    pub orchestrator: OrchestratorConfig,
    pub analysis: AnalysisConfig,
    pub io: IoConfig,
}

impl ExperimentConfig {
    pub fn small(seed: u64) -> Self {
        let run = RunConfig::small(seed);
        ExperimentConfig {
            seed,
            env: run.env,
            agent: run.agent,
            twin: run.twin,
            orchestrator: run.orchestrator,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            Error::parse_at_offset(text, offset, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.run_config().validate()?;
        let a = &self.analysis;
        if a.points == 0 || !(a.lambda_min <= a.lambda_max) || a.landscape_batch == 0 {
            return Err(Error::Config(
                "analysis needs points >= 1, lambda_min <= lambda_max and landscape_batch >= 1"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            env: self.env.clone(),
            agent: self.agent.clone(),
            twin: self.twin.clone(),
            orchestrator: self.orchestrator.clone(),
        }
    }
}
