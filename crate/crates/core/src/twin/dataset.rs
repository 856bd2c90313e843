use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Transition;
use crate::{Error, Result};

/// One logged real transition with the allocation as bandwidth fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinStep {
    pub s: Vec<f64>,
    pub action: usize,
    pub frac: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// Contiguous collection segment this step belongs to.
    pub episode: u64,
}

/// Logged transitions in collection order. Steps of one episode must be contiguous.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwinDataset {
    steps: Vec<TwinStep>,
}

impl TwinDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_steps(steps: Vec<TwinStep>) -> Result<Self> {
        let mut d = Self::new();
        for s in steps {
            d.push(s)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, step: TwinStep) -> Result<()> {
        if let Some(first) = self.steps.first() {
            if step.s.len() != first.s.len()
                || step.s_next.len() != first.s.len()
                || step.frac.len() != first.frac.len()
            {
                return Err(Error::Shape(
                    "twin step widths differ from the dataset".into(),
                ));
            }
            let last = self.steps.last().expect("nonempty");
            if step.episode != last.episode && self.steps.iter().any(|s| s.episode == step.episode)
            {
                return Err(Error::Validation(format!(
                    "episode {} is not contiguous in the dataset",
                    step.episode
                )));
            }
        } else if step.s.len() != step.s_next.len() {
            return Err(Error::Shape("state and next state widths differ".into()));
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[TwinStep] {
        &self.steps
    }

    pub fn state_dim(&self) -> Option<usize> {
        self.steps.first().map(|s| s.s.len())
    }

    /// Twin input of step `i`: the state concatenated with the allocation fractions.
    pub fn input(&self, i: usize) -> Vec<f64> {
        let st = &self.steps[i];
        let mut v = st.s.clone();
        v.extend_from_slice(&st.frac);
        v
    }

    /// Inputs of up to `window` steps ending at `i`, oldest first, never crossing
    /// an episode boundary.
    pub fn context(&self, i: usize, window: usize) -> Vec<Vec<f64>> {
        let episode = self.steps[i].episode;
        let mut start = i;
        while start > 0 && i + 1 - start < window && self.steps[start - 1].episode == episode {
            start -= 1;
        }
        (start..=i).map(|j| self.input(j)).collect()
    }

    /// Disjoint `(train, holdout)` index lists, each sorted.
    pub fn split(&self, holdout_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let h = ((self.len() as f64) * holdout_fraction).round() as usize;
        let h = h.min(self.len().saturating_sub(1));
        let mut holdout = idx[..h].to_vec();
        let mut train = idx[h..].to_vec();
        holdout.sort_unstable();
        train.sort_unstable();
        (train, holdout)
    }

    pub fn transitions(&self) -> Vec<Transition> {
        self.steps
            .iter()
            .map(|s| Transition {
                s: s.s.clone(),
                a: s.action,
                r: s.r,
                s_next: s.s_next.clone(),
            })
            .collect()
    }
}
