use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TwinDataset, TwinModel};
use crate::env::ActionCodec;
use crate::{Error, Result};

/// Rollout driver that lets an agent interact with a calibrated twin.
///
/// Rollouts start from a real state drawn from the dataset and are re-seeded
/// from a fresh real state every `rollout_reset_period` steps.
pub struct TwinSession<'a> {
    twin: &'a TwinModel,
    data: &'a TwinDataset,
    fractions: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    context: VecDeque<Vec<f64>>,
    state: Option<Vec<f64>>,
    since_reset: usize,
    steps: u64,
}

impl<'a> TwinSession<'a> {
    pub fn new(
        twin: &'a TwinModel,
        data: &'a TwinDataset,
        codec: &ActionCodec,
        seed: u64,
    ) -> Result<Self> {
        if !twin.is_calibrated() {
            return Err(Error::State("twin has not been calibrated".into()));
        }
        if data.is_empty() {
            return Err(Error::State("twin session needs real seed states".into()));
        }
        if codec.slices() + twin.state_dim() != twin.input_width() {
            return Err(Error::Shape(
                "action codec does not match the twin input".into(),
            ));
        }
        let fractions = (0..codec.count())
            .map(|a| codec.fractions(a))
            .collect::<Result<_>>()?;
        Ok(TwinSession {
            twin,
            data,
            fractions,
            rng: ChaCha8Rng::seed_from_u64(seed),
            context: VecDeque::new(),
            state: None,
            since_reset: 0,
            steps: 0,
        })
    }

    /// Re-seeds from a uniformly drawn real state and its real history.
    pub fn reset(&mut self) -> Vec<f64> {
        let i = self.rng.random_range(0..self.data.len());
        let mut ctx = self.data.context(i, self.twin.config().window);
        ctx.pop();
        self.context = ctx.into();
        let s = self.data.steps()[i].s.clone();
        self.state = Some(s.clone());
        self.since_reset = 0;
        s
    }

    pub fn state(&self) -> Option<&[f64]> {
        self.state.as_deref()
    }

    /// Twin steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Predicted `(next state, reward)` for `action`. When the reset period
    /// elapses the session state is re-seeded after the prediction is returned.
    pub fn step(&mut self, action: usize) -> Result<(Vec<f64>, f64)> {
        let s = self
            .state
            .take()
            .ok_or_else(|| Error::State("twin step called before reset".into()))?;
        let frac = self.fractions.get(action).ok_or(Error::Range {
            index: action,
            count: self.fractions.len(),
        })?;
        let mut input = s;
        input.extend_from_slice(frac);
        self.context.push_back(input);
        while self.context.len() > self.twin.config().window {
            self.context.pop_front();
        }
        let (next, r) = self.twin.predict(self.context.make_contiguous())?;
        self.steps += 1;
        self.since_reset += 1;
        if self.since_reset >= self.twin.config().rollout_reset_period {
            self.reset();
        } else {
            self.state = Some(next.clone());
        }
        Ok((next, r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twin::{TwinConfig, TwinStep};

    fn data() -> TwinDataset {
        let steps = (0..20)
            .map(|i| TwinStep {
                s: vec![i as f64 / 20.0, 0.5, 0.5],
                action: 0,
                frac: vec![0.25, 0.25, 0.5],
                r: 1.0,
                s_next: vec![0.5; 3],
                episode: 0,
            })
            .collect();
        TwinDataset::from_steps(steps).unwrap()
    }

    fn twin() -> TwinModel {
        let cfg = TwinConfig {
            hidden: 4,
            window: 3,
            reward_hidden: vec![4],
            rollout_reset_period: 1,
            ..TwinConfig::default()
        };
        TwinModel::new(cfg, 3, 3, 1).unwrap()
    }

    #[test]
    fn refuses_uncalibrated_twin() {
        let t = twin();
        let d = data();
        let codec = ActionCodec::new(4, 3).unwrap();
        assert!(matches!(
            TwinSession::new(&t, &d, &codec, 0),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn step_before_reset_and_period_one() {
        let mut t = twin();
        t.set_calibrated(true);
        let d = data();
        let codec = ActionCodec::new(4, 3).unwrap();
        let mut s = TwinSession::new(&t, &d, &codec, 0).unwrap();
        assert!(matches!(s.step(0), Err(Error::State(_))));
        s.reset();
        for _ in 0..10 {
            s.step(1).unwrap();
            let cur = s.state().unwrap().to_vec();
            assert!(
                d.steps().iter().any(|st| st.s == cur),
                "state must be real after every step"
            );
        }
        assert_eq!(s.steps(), 10);
    }
}
