use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::agent::{DqnAgent, ReplayBuffer, Transition};
use crate::analysis::metrics::{aggregate_rounds, MetricsRow, Phase, StepRecord};
use crate::env::{ActionCodec, SlicingEnv};
use crate::nn::blend;
use crate::twin::{TwinDataset, TwinModel, TwinSession, TwinStep};
use crate::{Error, Result};

/// Independent seed for sub-stream `stream` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) const ENV_STREAM: u64 = 0;
pub(crate) const AGENT1_STREAM: u64 = 1;
pub(crate) const AGENT2_STREAM: u64 = 2;
pub(crate) const TWIN_STREAM: u64 = 3;
const SESSION_STREAM: u64 = 1_000;
const SPLIT_STREAM: u64 = 2_000;

/// Interaction accounting and timings of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub real_interactions: u64,
    pub twin_interactions: u64,
    /// Wall-clock milliseconds per phase; kept out of the metrics stream.
    pub phase_ms: BTreeMap<String, f64>,
    pub rounds: Vec<MetricsRow>,
    /// Holdout next-state loss of the twin before and after each calibration.
    pub twin_holdout: Vec<(f64, f64)>,
}

impl RunLedger {
    fn time<T>(&mut self, phase: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        *self.phase_ms.entry(phase.to_string()).or_default() += start.elapsed().as_secs_f64() * 1e3;
        out
    }
}

pub struct RunOutput {
    pub ledger: RunLedger,
    pub records: Vec<StepRecord>,
    pub agent1: DqnAgent,
    pub agent2: DqnAgent,
    pub twin: Option<TwinModel>,
    /// Agent 1's replay buffer at the end of the run.
    pub replay: ReplayBuffer,
}

fn current_obs(env: &SlicingEnv) -> Result<Vec<f64>> {
    env.observation()
        .map(|o| o.normalized.clone())
        .ok_or_else(|| Error::State("environment has not been reset".into()))
}

fn real_step(
    env: &mut SlicingEnv,
    agent: &mut DqnAgent,
    explore: f64,
    phase: Phase,
    episode: u64,
    ledger: &mut RunLedger,
) -> Result<StepRecord> {
    let obs = current_obs(env)?;
    let action = agent.select_action(&obs, explore)?;
    let out = env.step(action)?;
    ledger.real_interactions += 1;
    Ok(StepRecord {
        t: out.t,
        obs,
        action_index: action,
        alloc: out.alloc,
        se: out.se,
        ssr: out.ssr,
        utility: out.utility,
        reward: out.reward,
        next_obs: out.next_obs.normalized,
        episode,
        phase,
        twin_interactions: ledger.twin_interactions,
    })
}

fn transition(rec: &StepRecord) -> Transition {
    Transition {
        s: rec.obs.clone(),
        a: rec.action_index,
        r: rec.reward,
        s_next: rec.next_obs.clone(),
    }
}

/// `m` real transitions under Agent 1's epsilon-greedy policy. `explore`
/// overrides the agent's schedule (the first iteration collects uniformly).
pub fn collect_data(
    env: &mut SlicingEnv,
    agent: &mut DqnAgent,
    m: usize,
    explore: Option<f64>,
    episode: u64,
    ledger: &mut RunLedger,
) -> Result<Vec<StepRecord>> {
    if m == 0 {
        return Err(Error::Validation("collection size must be >= 1".into()));
    }
    (0..m)
        .map(|_| {
            let xi =
                explore.unwrap_or_else(|| agent.config().explore_rate(ledger.real_interactions));
            real_step(env, agent, xi, Phase::Collect, episode, ledger)
        })
        .collect()
}

/// Twin dataset with allocations expressed as bandwidth fractions.
pub fn dataset_from_records(records: &[StepRecord], codec: &ActionCodec) -> Result<TwinDataset> {
    let units = codec.units() as f64;
    let steps = records
        .iter()
        .map(|r| TwinStep {
            s: r.obs.clone(),
            action: r.action_index,
            frac: r.alloc.iter().map(|&u| u as f64 / units).collect(),
            r: r.reward,
            s_next: r.next_obs.clone(),
            episode: r.episode,
        })
        .collect();
    TwinDataset::from_steps(steps)
}

/// Agent 2's inner loop against the twin. Returns the buffer it filled.
#[allow(clippy::too_many_arguments)]
pub fn train_agent2_in_twin(
    agent2: &mut DqnAgent,
    twin: &TwinModel,
    data: &TwinDataset,
    codec: &ActionCodec,
    steps: usize,
    explore: f64,
    seed: u64,
    ledger: &mut RunLedger,
) -> Result<ReplayBuffer> {
    let mut session = TwinSession::new(twin, data, codec, seed)?;
    let mut buffer = ReplayBuffer::new(agent2.config().replay_capacity);
    let mut obs = session.reset();
    for _ in 0..steps {
        let a = agent2.select_action(&obs, explore)?;
        let (s_next, r) = session.step(a)?;
        ledger.twin_interactions += 1;
        buffer.push(Transition {
            s: obs,
            a,
            r,
            s_next,
        });
        obs = session.state().expect("session stays seeded").to_vec();
        if buffer.len() >= agent2.config().batch_size {
            agent2.train_step(&buffer)?;
        }
    }
    Ok(buffer)
}

/// `zeta * theta1 + (1 - zeta) * theta2`.
pub fn empower(theta1: &[f64], theta2: &[f64], zeta: f64) -> Result<Vec<f64>> {
    blend(theta1, theta2, zeta)
}

/// `steps` epsilon-greedy real steps with one train call per step once the
/// buffer holds a minibatch.
pub fn train_agent_real(
    agent: &mut DqnAgent,
    env: &mut SlicingEnv,
    steps: usize,
    buffer: &mut ReplayBuffer,
    episode: u64,
    ledger: &mut RunLedger,
) -> Result<Vec<StepRecord>> {
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let xi = agent.config().explore_rate(ledger.real_interactions);
        let rec = real_step(env, agent, xi, Phase::Train, episode, ledger)?;
        buffer.push(transition(&rec));
        if buffer.len() >= agent.config().batch_size {
            agent.train_step(buffer)?;
        }
        out.push(rec);
    }
    Ok(out)
}

fn setup(cfg: &RunConfig) -> Result<(SlicingEnv, DqnAgent)> {
    cfg.validate()?;
    let mut env = SlicingEnv::new(cfg.env.clone())?;
    env.reset(derive_seed(cfg.seed, ENV_STREAM));
    let agent = DqnAgent::new(
        cfg.agent.clone(),
        cfg.env.num_slices(),
        env.num_actions(),
        derive_seed(cfg.seed, AGENT1_STREAM),
    )?;
    Ok((env, agent))
}

/// The two-loop twin-enhanced procedure. With `orchestrator.twin == false`
/// only the real-environment phases run, which is plain DQN / DDQN training.
pub fn run_algorithm1(cfg: &RunConfig) -> Result<RunOutput> {
    let (mut env, mut agent1) = setup(cfg)?;
    let oc = &cfg.orchestrator;
    let codec = env.codec().clone();
    let mut agent2 = agent1.clone();
    agent2.reseed(derive_seed(cfg.seed, AGENT2_STREAM));
    let mut twin = if oc.twin {
        Some(TwinModel::new(
            cfg.twin.clone(),
            cfg.env.num_slices(),
            cfg.env.num_slices(),
            derive_seed(cfg.seed, TWIN_STREAM),
        )?)
    } else {
        None
    };
    let mut ledger = RunLedger::default();
    let mut records = Vec::new();
    let mut sigma1 = ReplayBuffer::new(cfg.agent.replay_capacity);

    for it in 0..oc.iterations {
        let episode = it as u64;
        if let Some(twin) = twin.as_mut() {
            let explore = (it == 0).then_some(1.0);
            let collected = ledger.time("collect", |l| {
                collect_data(&mut env, &mut agent1, oc.collect_steps, explore, episode, l)
            })?;
            for rec in &collected {
                sigma1.push(transition(rec));
            }
            let data = dataset_from_records(&collected, &codec)?;
            records.extend(collected);

            ledger.time("twin_fit", |l| {
                let (train, holdout) = data.split(
                    cfg.twin.holdout_fraction,
                    derive_seed(cfg.seed, SPLIT_STREAM + episode),
                );
                let before = if holdout.is_empty() {
                    None
                } else {
                    Some(twin.evaluate(&data, &holdout)?.0)
                };
                twin.fit(&data, &train)?;
                if let Some(before) = before {
                    l.twin_holdout
                        .push((before, twin.evaluate(&data, &holdout)?.0));
                }
                Ok(())
            })?;

            ledger.time("twin_train", |l| {
                train_agent2_in_twin(
                    &mut agent2,
                    twin,
                    &data,
                    &codec,
                    oc.twin_steps,
                    oc.twin_explore,
                    derive_seed(cfg.seed, SESSION_STREAM + episode),
                    l,
                )
            })?;

            let blended = empower(
                &agent1.online().flatten(),
                &agent2.online().flatten(),
                oc.zeta,
            )?;
            agent1.assign_online_flat(&blended)?;
            agent1.sync_target();
        }

        let steps = ledger.time("real_train", |l| {
            train_agent_real(
                &mut agent1,
                &mut env,
                oc.real_steps,
                &mut sigma1,
                episode,
                l,
            )
        })?;
        records.extend(steps);
        agent2.copy_weights_from(&agent1)?;
    }

    ledger.rounds = aggregate_rounds(&records, oc.round_size)?;
    Ok(RunOutput {
        ledger,
        records,
        agent1,
        agent2,
        twin,
        replay: sigma1,
    })
}

/// Standalone plain DQN / DDQN trainer for `steps` real interactions.
pub fn run_baseline(cfg: &RunConfig, steps: usize) -> Result<RunOutput> {
    let (mut env, mut agent) = setup(cfg)?;
    let mut buffer = ReplayBuffer::new(cfg.agent.replay_capacity);
    let mut ledger = RunLedger::default();
    let mut records = Vec::with_capacity(steps);
    let per_episode = cfg.orchestrator.real_steps.max(1);
    for i in 0..steps {
        let xi = agent.config().explore_rate(i as u64);
        let rec = real_step(
            &mut env,
            &mut agent,
            xi,
            Phase::Train,
            (i / per_episode) as u64,
            &mut ledger,
        )?;
        buffer.push(transition(&rec));
        if buffer.len() >= cfg.agent.batch_size {
            agent.train_step(&buffer)?;
        }
        records.push(rec);
    }
    ledger.rounds = aggregate_rounds(&records, cfg.orchestrator.round_size)?;
    Ok(RunOutput {
        ledger,
        records,
        agent2: agent.clone(),
        agent1: agent,
        twin: None,
        replay: buffer,
    })
}
