use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{argmax, DqnAgent, ReplayBuffer};
use crate::nn::{AdamState, Loss, MlpSpec, ParamSet};
use crate::{Error, Result};

/// Small policy network imitating a teacher's greedy actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Student {
    pub spec: MlpSpec,
    pub params: ParamSet,
}

impl Student {
    pub fn greedy_batch(&self, states: &[Vec<f64>]) -> Result<Vec<usize>> {
        let x = rows(states, self.spec.input_width())?;
        let out = self.spec.forward(&self.params, x.view())?;
        Ok(out
            .rows()
            .into_iter()
            .map(|r| argmax(r.as_slice().expect("standard layout")))
            .collect())
    }

    pub fn greedy(&self, obs: &[f64]) -> Result<usize> {
        Ok(self.greedy_batch(&[obs.to_vec()])?[0])
    }
}

fn rows(states: &[Vec<f64>], width: usize) -> Result<Array2<f64>> {
    crate::agent::stack_rows(states.iter().map(Vec::as_slice), width)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistillOutput {
    pub student: Student,
    /// Greedy-action agreement with the teacher on the held-out states.
    pub agreement: f64,
    pub holdout: usize,
    /// Mean pre-step cross-entropy over consecutive blocks of 100 updates.
    pub loss: Vec<f64>,
}

/// `n` states drawn uniformly (with replacement) from a replay buffer.
pub fn state_pool(buffer: &ReplayBuffer, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(buffer
        .sample(n, &mut rng)?
        .into_iter()
        .map(|t| t.s.clone())
        .collect())
}

/// Fraction of `states` on which the two policies pick the same action.
pub fn agreement(student: &Student, teacher: &DqnAgent, states: &[Vec<f64>]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::Validation(
            "agreement over an empty state set".into(),
        ));
    }
    let labels = teacher.greedy_batch(rows(states, teacher.spec().input_width())?.view())?;
    let picks = student.greedy_batch(states)?;
    Ok(labels.iter().zip(&picks).filter(|(a, b)| a == b).count() as f64 / states.len() as f64)
}

/// Trains a student on the teacher's greedy pseudo-labels with the negative
/// log-likelihood of each label under the student softmax.
#[allow(clippy::too_many_arguments)]
pub fn distill(
    teacher: &DqnAgent,
    pool: &[Vec<f64>],
    hidden: &[usize],
    budget: usize,
    batch: usize,
    lr: f64,
    holdout_fraction: f64,
    seed: u64,
) -> Result<DistillOutput> {
    if pool.is_empty() {
        return Err(Error::Validation("distillation pool is empty".into()));
    }
    if batch == 0 {
        return Err(Error::Validation("distillation batch must be >= 1".into()));
    }
    let width = teacher.spec().input_width();
    let labels = teacher.greedy_batch(rows(pool, width)?.view())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.shuffle(&mut rng);
    let h = ((pool.len() as f64) * holdout_fraction).round() as usize;
    let h = h.clamp(
        usize::from(pool.len() > 1),
        pool.len().saturating_sub(1).max(1),
    );
    let (holdout, train) = idx.split_at(h.min(pool.len()));
    let train = if train.is_empty() { holdout } else { train };

    let mut widths = vec![width];
    widths.extend(hidden);
    widths.push(teacher.num_actions());
    let spec = MlpSpec::new(widths)?;
    let mut params = spec.init(&mut rng);
    let mut adam = AdamState::new(&params, lr);
    let mut loss_log = Vec::new();
    let mut acc = 0.0;
    for step in 0..budget {
        let pick: Vec<usize> = (0..batch)
            .map(|_| train[rng.random_range(0..train.len())])
            .collect();
        let x = rows(
            &pick.iter().map(|&i| pool[i].clone()).collect::<Vec<_>>(),
            width,
        )?;
        let y: Vec<usize> = pick.iter().map(|&i| labels[i]).collect();
        let cache = spec.forward_cached(&params, x.view())?;
        let (value, d_out) = Loss::CrossEntropy { labels: &y }.evaluate(&cache.output)?;
        let grads = spec.backward(&params, &cache, &d_out)?;
        adam.update(&mut params, &grads)?;
        acc += value;
        if (step + 1) % 100 == 0 {
            loss_log.push(acc / 100.0);
            acc = 0.0;
        }
    }
    let student = Student { spec, params };
    let held: Vec<Vec<f64>> = holdout.iter().map(|&i| pool[i].clone()).collect();
    let agreement = agreement(&student, teacher, &held)?;
    Ok(DistillOutput {
        student,
        agreement,
        holdout: held.len(),
        loss: loss_log,
    })
}
