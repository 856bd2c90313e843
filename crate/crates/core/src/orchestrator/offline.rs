use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::algorithm::{derive_seed, AGENT1_STREAM, AGENT2_STREAM, TWIN_STREAM};
use super::{train_agent2_in_twin, RunConfig, RunLedger};
use crate::agent::{DqnAgent, Transition};
use crate::env::ActionCodec;
use crate::twin::{TwinDataset, TwinModel};
use crate::{Error, Result};

const SHUFFLE_STREAM: u64 = 5;
const SESSION_STREAM: u64 = 6;
const SPLIT_STREAM: u64 = 7;

pub struct OfflineOutput {
    pub agent: DqnAgent,
    /// Reference parameters of the proximity penalty.
    pub theta_ref: Vec<f64>,
    pub twin: Option<TwinModel>,
    /// Mean pre-step objective per epoch.
    pub epoch_loss: Vec<f64>,
    pub ledger: RunLedger,
}

/// Batch training on a fixed dataset with penalty `upsilon/2 ||theta - theta_ref||^2`.
///
/// In twin mode the twin is calibrated on the dataset and Agent 2 is trained
/// inside it first; its parameters become `theta_ref`. Otherwise `theta_ref`
/// is zero. No real environment is ever stepped.
pub fn run_offline(cfg: &RunConfig, data: &TwinDataset) -> Result<OfflineOutput> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::State(
            "offline training needs a nonempty dataset".into(),
        ));
    }
    let oc = &cfg.orchestrator;
    let n = cfg.env.num_slices();
    let codec = ActionCodec::new(cfg.env.units, n)?;
    let mut agent = DqnAgent::new(
        cfg.agent.clone(),
        n,
        codec.count(),
        derive_seed(cfg.seed, AGENT1_STREAM),
    )?;
    let mut ledger = RunLedger::default();

    let (theta_ref, twin) = if oc.twin {
        let mut twin = TwinModel::new(cfg.twin.clone(), n, n, derive_seed(cfg.seed, TWIN_STREAM))?;
        let (train, holdout) = data.split(
            cfg.twin.holdout_fraction,
            derive_seed(cfg.seed, SPLIT_STREAM),
        );
        let before = (!holdout.is_empty())
            .then(|| twin.evaluate(data, &holdout))
            .transpose()?;
        twin.fit(data, &train)?;
        if let Some((before, _)) = before {
            ledger
                .twin_holdout
                .push((before, twin.evaluate(data, &holdout)?.0));
        }
        let mut agent2 = agent.clone();
        agent2.reseed(derive_seed(cfg.seed, AGENT2_STREAM));
        train_agent2_in_twin(
            &mut agent2,
            &twin,
            data,
            &codec,
            oc.twin_steps,
            oc.twin_explore,
            derive_seed(cfg.seed, SESSION_STREAM),
            &mut ledger,
        )?;
        (agent2.online().flatten(), Some(twin))
    } else {
        (vec![0.0; agent.online().len()], None)
    };

    let transitions: Vec<Transition> = data.transitions();
    let mut order: Vec<usize> = (0..transitions.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SHUFFLE_STREAM));
    let mut epoch_loss = Vec::with_capacity(oc.offline_epochs);
    for _ in 0..oc.offline_epochs {
        order.shuffle(&mut rng);
        let (mut total, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(oc.offline_batch) {
            let batch: Vec<&Transition> = chunk.iter().map(|&i| &transitions[i]).collect();
            total += agent.train_on_batch(&batch, Some((&theta_ref, oc.upsilon)))?;
            batches += 1;
        }
        epoch_loss.push(total / batches as f64);
    }
    Ok(OfflineOutput {
        agent,
        theta_ref,
        twin,
        epoch_loss,
        ledger,
    })
}
