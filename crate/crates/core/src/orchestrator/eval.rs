use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::metrics::{Phase, StepRecord};
use crate::env::{EnvConfig, SlicingEnv};
use crate::{Error, Result};

/// Seed stream for held-out evaluation environments.
pub const EVAL_STREAM: u64 = 77;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub steps: usize,
    pub mean_utility: f64,
    pub mean_reward: f64,
    pub mean_se: f64,
    pub mean_ssr: Vec<f64>,
}

/// Per-step records of `policy` over `steps` steps in a fresh environment
/// seeded with `seed`, episode 0, tagged as evaluation.
pub fn rollout(
    cfg: &EnvConfig,
    seed: u64,
    steps: usize,
    mut policy: impl FnMut(&[f64]) -> Result<usize>,
) -> Result<Vec<StepRecord>> {
    if steps == 0 {
        return Err(Error::Validation(
            "evaluation needs at least one step".into(),
        ));
    }
    let mut env = SlicingEnv::new(cfg.clone())?;
    let mut obs = env.reset(seed).normalized;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let action = policy(&obs)?;
        let o = env.step(action)?;
        let next = o.next_obs.normalized;
        out.push(StepRecord {
            t: o.t,
            obs: std::mem::replace(&mut obs, next.clone()),
            action_index: action,
            alloc: o.alloc,
            se: o.se,
            ssr: o.ssr,
            utility: o.utility,
            reward: o.reward,
            next_obs: next,
            episode: 0,
            phase: Phase::Eval,
            twin_interactions: 0,
        });
    }
    Ok(out)
}

pub fn summarize(records: &[StepRecord]) -> Result<EvalSummary> {
    let first = records
        .first()
        .ok_or_else(|| Error::Validation("nothing to summarize".into()))?;
    let (mut u, mut r, mut se, mut ssr) = (0.0, 0.0, 0.0, vec![0.0; first.ssr.len()]);
    for rec in records {
        u += rec.utility;
        r += rec.reward;
        se += rec.se;
        for (acc, v) in ssr.iter_mut().zip(&rec.ssr) {
            *acc += v;
        }
    }
    let k = records.len() as f64;
    Ok(EvalSummary {
        steps: records.len(),
        mean_utility: u / k,
        mean_reward: r / k,
        mean_se: se / k,
        mean_ssr: ssr.into_iter().map(|v| v / k).collect(),
    })
}

pub fn evaluate_policy(
    cfg: &EnvConfig,
    seed: u64,
    steps: usize,
    policy: impl FnMut(&[f64]) -> Result<usize>,
) -> Result<EvalSummary> {
    summarize(&rollout(cfg, seed, steps, policy)?)
}

/// Uniform-random allocation baseline.
pub fn evaluate_random(cfg: &EnvConfig, seed: u64, steps: usize) -> Result<EvalSummary> {
    let actions = SlicingEnv::new(cfg.clone())?.num_actions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    evaluate_policy(cfg, seed, steps, |_| Ok(rng.random_range(0..actions)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_policy_is_deterministic() {
        let cfg = EnvConfig::small();
        let a = evaluate_policy(&cfg, 3, 20, |_| Ok(5)).unwrap();
        let b = evaluate_policy(&cfg, 3, 20, |_| Ok(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.mean_ssr.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(evaluate_policy(&cfg, 3, 0, |_| Ok(0)).is_err());
    }
}
