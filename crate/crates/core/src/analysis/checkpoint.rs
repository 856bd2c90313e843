use std::collections::BTreeMap;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, DqnAgent};
use crate::nn::{AdamState, Arch, ParamSet};
use crate::orchestrator::Student;
use crate::twin::TwinModel;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub arch: Arch,
    pub params: ParamSet,
}

/// Self-describing snapshot of one or more networks and their training state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    /// `agent`, `student` or `twin`.
    pub kind: String,
    pub networks: BTreeMap<String, NetworkState>,
    #[serde(default)]
    pub optimizers: BTreeMap<String, AdamState>,
    #[serde(default)]
    pub counters: BTreeMap<String, u64>,
    #[serde(default)]
    pub rng: Option<ChaCha8Rng>,
    #[serde(default)]
    pub agent: Option<AgentConfig>,
}

fn schema(e: Error) -> Error {
    match e {
        Error::Shape(m) | Error::Config(m) => Error::Schema(m),
        other => other,
    }
}

impl Checkpoint {
    fn empty(kind: &str) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            kind: kind.to_string(),
            networks: BTreeMap::new(),
            optimizers: BTreeMap::new(),
            counters: BTreeMap::new(),
            rng: None,
            agent: None,
        }
    }

    pub fn from_agent(agent: &DqnAgent) -> Self {
        let mut c = Self::empty("agent");
        let arch = Arch::Mlp(agent.spec().clone());
        c.networks.insert(
            "online".into(),
            NetworkState {
                arch: arch.clone(),
                params: agent.online().clone(),
            },
        );
        c.networks.insert(
            "target".into(),
            NetworkState {
                arch,
                params: agent.target().clone(),
            },
        );
        c.optimizers
            .insert("online".into(), agent.optimizer().clone());
        c.counters.insert("train_steps".into(), agent.train_steps());
        c.rng = Some(agent.rng().clone());
        c.agent = Some(agent.config().clone());
        c
    }

    fn network(&self, name: &str) -> Result<&NetworkState> {
        self.networks
            .get(name)
            .ok_or_else(|| Error::Schema(format!("checkpoint has no `{name}` network")))
    }

    pub fn to_agent(&self) -> Result<DqnAgent> {
        let online = self.network("online")?;
        let target = self.network("target")?;
        let Arch::Mlp(spec) = &online.arch else {
            return Err(Error::Schema("agent network must be an mlp".into()));
        };
        if target.arch != online.arch {
            return Err(Error::Schema(
                "online and target architectures differ".into(),
            ));
        }
        let cfg = self
            .agent
            .clone()
            .ok_or_else(|| Error::Schema("agent config missing".into()))?;
        let adam = self
            .optimizers
            .get("online")
            .cloned()
            .ok_or_else(|| Error::Schema("optimizer state missing".into()))?;
        let rng = self
            .rng
            .clone()
            .ok_or_else(|| Error::Schema("rng state missing".into()))?;
        let steps = self.counters.get("train_steps").copied().unwrap_or(0);
        DqnAgent::from_parts(
            cfg,
            spec.clone(),
            online.params.clone(),
            target.params.clone(),
            adam,
            rng,
            steps,
        )
        .map_err(schema)
    }

    pub fn from_student(student: &Student) -> Self {
        let mut c = Self::empty("student");
        c.networks.insert(
            "student".into(),
            NetworkState {
                arch: Arch::Mlp(student.spec.clone()),
                params: student.params.clone(),
            },
        );
        c
    }

    pub fn to_student(&self) -> Result<Student> {
        let net = self.network("student")?;
        let Arch::Mlp(spec) = &net.arch else {
            return Err(Error::Schema("student network must be an mlp".into()));
        };
        Ok(Student {
            spec: spec.clone(),
            params: net.params.clone(),
        })
    }

    pub fn from_twin(twin: &TwinModel) -> Self {
        let mut c = Self::empty("twin");
        c.networks.insert(
            "state".into(),
            NetworkState {
                arch: Arch::Lstm(twin.lstm_spec().clone()),
                params: twin.lstm_params().clone(),
            },
        );
        c.networks.insert(
            "reward".into(),
            NetworkState {
                arch: Arch::Mlp(twin.reward_spec().clone()),
                params: twin.reward_params().clone(),
            },
        );
        c
    }

    /// Checks every parameter set against its declared architecture.
    pub fn validate(&self) -> Result<()> {
        for (name, net) in &self.networks {
            net.arch
                .check_params(&net.params)
                .map_err(|e| Error::Schema(format!("network `{name}`: {e}")))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Schema(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::parse_at(text, e.line(), e.column(), e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Schema("missing format_version".into()))?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(Error::Version {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let c: Checkpoint =
            serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
