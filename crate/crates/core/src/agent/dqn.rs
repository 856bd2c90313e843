use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AgentConfig, Algorithm, ReplayBuffer, Transition};
use crate::nn::{AdamState, Loss, MlpSpec, ParamSet};
use crate::{Error, Result};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn stack_rows<'a>(
    rows: impl ExactSizeIterator<Item = &'a [f64]>,
    width: usize,
) -> Result<Array2<f64>> {
    let n = rows.len();
    let mut data = Vec::with_capacity(n * width);
    for r in rows {
        if r.len() != width {
            return Err(Error::Shape(format!(
                "state has width {}, expected {width}",
                r.len()
            )));
        }
        data.extend_from_slice(r);
    }
    Array2::from_shape_vec((n, width), data).map_err(|e| Error::Shape(e.to_string()))
}

/// Bootstrapped targets with no terminal masking (the task is continuing).
///
/// DQN uses `max_a Q_target(s', a)`; DDQN evaluates the target net at the
/// online net's greedy action.
pub fn td_targets(
    spec: &MlpSpec,
    online: &ParamSet,
    target: &ParamSet,
    batch: &[&Transition],
    algorithm: Algorithm,
    discount: f64,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Validation("empty batch".into()));
    }
    let next = stack_rows(
        batch.iter().map(|t| t.s_next.as_slice()),
        spec.input_width(),
    )?;
    let q_target = spec.forward(target, next.view())?;
    let q_online = match algorithm {
        Algorithm::Dqn => None,
        Algorithm::Ddqn => Some(spec.forward(online, next.view())?),
    };
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let row = q_target.row(i);
            let row = row.as_slice().expect("standard layout");
            let boot = match &q_online {
                None => row[argmax(row)],
                Some(q) => row[argmax(q.row(i).as_slice().expect("standard layout"))],
            };
            t.r + discount * boot
        })
        .collect())
}

/// DQN / DDQN agent with an online and a target Q-network.
#[derive(Clone, Debug)]
pub struct DqnAgent {
    cfg: AgentConfig,
    spec: MlpSpec,
    online: ParamSet,
    target: ParamSet,
    adam: AdamState,
    rng: ChaCha8Rng,
    train_steps: u64,
}

impl DqnAgent {
    pub fn new(cfg: AgentConfig, state_dim: usize, num_actions: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut widths = vec![state_dim];
        widths.extend(&cfg.hidden);
        widths.push(num_actions);
        let spec = MlpSpec::new(widths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = spec.init(&mut rng);
        let adam = AdamState::new(&online, cfg.learning_rate);
        Ok(DqnAgent {
            target: online.clone(),
            cfg,
            spec,
            online,
            adam,
            rng,
            train_steps: 0,
        })
    }

    /// Reassembles an agent from persisted parts, validating every shape.
    pub fn from_parts(
        cfg: AgentConfig,
        spec: MlpSpec,
        online: ParamSet,
        target: ParamSet,
        adam: AdamState,
        rng: ChaCha8Rng,
        train_steps: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        spec.check_params(&online)?;
        spec.check_params(&target)?;
        spec.check_params(&adam.m)?;
        spec.check_params(&adam.v)?;
        Ok(DqnAgent {
            cfg,
            spec,
            online,
            target,
            adam,
            rng,
            train_steps,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn online(&self) -> &ParamSet {
        &self.online
    }

    pub fn target(&self) -> &ParamSet {
        &self.target
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.adam
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn num_actions(&self) -> usize {
        self.spec.output_width()
    }

    pub fn set_online(&mut self, params: ParamSet) -> Result<()> {
        self.spec.check_params(&params)?;
        self.online = params;
        Ok(())
    }

    pub fn assign_online_flat(&mut self, flat: &[f64]) -> Result<()> {
        self.online.assign_flat(flat)
    }

    pub fn q_values(&self, states: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.spec.forward(&self.online, states)
    }

    pub fn greedy(&self, obs: &[f64]) -> Result<usize> {
        let q = self.q_values(stack_rows(std::iter::once(obs), self.spec.input_width())?.view())?;
        Ok(argmax(q.row(0).as_slice().expect("standard layout")))
    }

    pub fn greedy_batch(&self, states: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let q = self.q_values(states)?;
        Ok(q.rows()
            .into_iter()
            .map(|r| argmax(r.as_slice().expect("standard layout")))
            .collect())
    }

    /// Epsilon-greedy choice; both random draws are taken on every call so the
    /// generator advances identically whatever the outcome.
    pub fn select_action(&mut self, obs: &[f64], explore: f64) -> Result<usize> {
        let coin: f64 = self.rng.random();
        let random = self.rng.random_range(0..self.num_actions());
        if coin < explore {
            Ok(random)
        } else {
            self.greedy(obs)
        }
    }

    pub fn targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        td_targets(
            &self.spec,
            &self.online,
            &self.target,
            batch,
            self.cfg.algorithm,
            self.cfg.discount,
        )
    }

    /// TD loss and its gradient at `params` against fixed `targets`.
    pub fn td_loss_grad(
        &self,
        params: &ParamSet,
        batch: &[&Transition],
        targets: &[f64],
    ) -> Result<(f64, ParamSet)> {
        let x = stack_rows(
            batch.iter().map(|t| t.s.as_slice()),
            self.spec.input_width(),
        )?;
        let actions: Vec<usize> = batch.iter().map(|t| t.a).collect();
        let cache = self.spec.forward_cached(params, x.view())?;
        let loss = Loss::Td {
            actions: &actions,
            targets,
        };
        let (value, d_out) = loss.evaluate(&cache.output)?;
        Ok((value, self.spec.backward(params, &cache, &d_out)?))
    }

    /// TD loss at `params` against fixed `targets`, no gradient.
    pub fn td_loss(
        &self,
        params: &ParamSet,
        batch: &[&Transition],
        targets: &[f64],
    ) -> Result<f64> {
        let x = stack_rows(
            batch.iter().map(|t| t.s.as_slice()),
            self.spec.input_width(),
        )?;
        let actions: Vec<usize> = batch.iter().map(|t| t.a).collect();
        let out = self.spec.forward(params, x.view())?;
        Ok(Loss::Td {
            actions: &actions,
            targets,
        }
        .evaluate(&out)?
        .0)
    }

    /// One optimizer step on `batch`. With `penalty = Some((theta_ref, upsilon))`
    /// the objective gains `upsilon/2 * ||theta - theta_ref||^2`; `upsilon == 0`
    /// takes exactly the plain path. Returns the pre-step objective.
    pub fn train_on_batch(
        &mut self,
        batch: &[&Transition],
        penalty: Option<(&[f64], f64)>,
    ) -> Result<f64> {
        let targets = self.targets(batch)?;
        let (mut value, mut grads) = self.td_loss_grad(&self.online, batch, &targets)?;
        if let Some((reference, upsilon)) = penalty.filter(|&(_, u)| u != 0.0) {
            let theta = self.online.flatten();
            if reference.len() != theta.len() {
                return Err(Error::Shape(format!(
                    "penalty reference has {} values, agent has {}",
                    reference.len(),
                    theta.len()
                )));
            }
            let mut g = grads.flatten();
            let mut sq = 0.0;
            for ((gk, &tk), &rk) in g.iter_mut().zip(&theta).zip(reference) {
                let d = tk - rk;
                sq += d * d;
                *gk += upsilon * d;
            }
            value += 0.5 * upsilon * sq;
            grads.assign_flat(&g)?;
        }
        self.adam.update(&mut self.online, &grads)?;
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.cfg.target_sync) {
            self.sync_target();
        }
        Ok(value)
    }

    /// Samples a minibatch from `buffer` and trains on it.
    pub fn train_step(&mut self, buffer: &ReplayBuffer) -> Result<f64> {
        if buffer.len() < self.cfg.batch_size {
            return Err(Error::State(format!(
                "buffer holds {} transitions, minibatch needs {}",
                buffer.len(),
                self.cfg.batch_size
            )));
        }
        let batch = buffer.sample(self.cfg.batch_size, &mut self.rng)?;
        self.train_on_batch(&batch, None)
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Copies the online and target networks of `other` (same architecture).
    pub fn copy_weights_from(&mut self, other: &DqnAgent) -> Result<()> {
        self.spec.check_params(&other.online)?;
        self.online = other.online.clone();
        self.target = other.target.clone();
        Ok(())
    }

    /// Uses `rng` for all subsequent exploration and sampling.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn small_cfg() -> AgentConfig {
        AgentConfig {
            hidden: vec![8],
            batch_size: 4,
            replay_capacity: 16,
            ..AgentConfig::default()
        }
    }

    fn tr(s: [f64; 2], a: usize, r: f64, n: [f64; 2]) -> Transition {
        Transition {
            s: s.to_vec(),
            a,
            r,
            s_next: n.to_vec(),
        }
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 0.0]), 1);
        assert_eq!(argmax(&[0.0; 4]), 0);
    }

    #[test]
    fn fresh_agent_target_equals_online() {
        let a = DqnAgent::new(small_cfg(), 2, 5, 1).unwrap();
        assert_eq!(a.online(), a.target());
    }

    #[test]
    fn greedy_follows_forced_bias() {
        let mut a = DqnAgent::new(small_cfg(), 2, 10, 1).unwrap();
        let mut p = a.online().zeros_like();
        let mut b = vec![0.0; 10];
        b[7] = 1.0;
        *p.get_mut("layer01.b").unwrap() = Tensor::from_vec(&[10], b).unwrap();
        a.set_online(p).unwrap();
        assert_eq!(a.select_action(&[0.3, 0.4], 0.0).unwrap(), 7);
    }

    #[test]
    fn greedy_invariant_under_positive_scaling() {
        let mut a = DqnAgent::new(small_cfg(), 2, 6, 4).unwrap();
        let before = a.greedy(&[0.2, 0.9]).unwrap();
        let mut p = a.online().clone();
        for name in ["layer01.w", "layer01.b"] {
            p.get_mut(name)
                .unwrap()
                .data
                .iter_mut()
                .for_each(|v| *v *= 3.5);
        }
        a.set_online(p).unwrap();
        assert_eq!(a.greedy(&[0.2, 0.9]).unwrap(), before);
    }

    #[test]
    fn pure_exploration_is_uniform() {
        let mut a = DqnAgent::new(small_cfg(), 2, 5, 9).unwrap();
        let n = 10_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[a.select_action(&[0.0, 0.0], 1.0).unwrap()] += 1;
        }
        let mean = n as f64 / 5.0;
        let sd = (n as f64 * 0.2 * 0.8).sqrt();
        assert!(
            counts.iter().all(|&c| (c as f64 - mean).abs() < 3.0 * sd),
            "{counts:?}"
        );
    }

    #[test]
    fn myopic_targets_equal_rewards() {
        let a = DqnAgent::new(
            AgentConfig {
                discount: 0.0,
                ..small_cfg()
            },
            2,
            3,
            2,
        )
        .unwrap();
        let batch = [
            tr([0.1, 0.2], 0, 1.5, [0.5, 0.5]),
            tr([0.3, 0.2], 2, -0.5, [0.9, 0.1]),
        ];
        let refs: Vec<&Transition> = batch.iter().collect();
        for alg in [Algorithm::Dqn, Algorithm::Ddqn] {
            let y = td_targets(a.spec(), a.online(), a.target(), &refs, alg, 0.0).unwrap();
            assert_eq!(y, vec![1.5, -0.5]);
        }
    }

    #[test]
    fn dqn_target_hand_value() {
        // Zero weights, output bias (0, 2): max target Q is 2 everywhere.
        let spec = MlpSpec::new(vec![2, 2]).unwrap();
        let mut p = spec.zeros();
        p.get_mut("layer00.b").unwrap().data = vec![0.0, 2.0];
        let t = tr([0.0, 0.0], 0, 1.0, [0.4, 0.4]);
        let y = td_targets(&spec, &p, &p, &[&t], Algorithm::Dqn, 0.9).unwrap();
        assert!((y[0] - 2.8).abs() < 1e-12);
    }

    #[test]
    fn ddqn_matches_dqn_when_nets_agree() {
        let a = DqnAgent::new(small_cfg(), 2, 7, 5).unwrap();
        let batch: Vec<Transition> = (0..20)
            .map(|i| {
                tr(
                    [i as f64 / 20.0, 0.5],
                    i % 7,
                    0.1 * i as f64,
                    [0.5, i as f64 / 20.0],
                )
            })
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let d = td_targets(a.spec(), a.online(), a.target(), &refs, Algorithm::Dqn, 0.9).unwrap();
        let dd = td_targets(
            a.spec(),
            a.online(),
            a.target(),
            &refs,
            Algorithm::Ddqn,
            0.9,
        )
        .unwrap();
        assert_eq!(d, dd);
    }

    #[test]
    fn zero_reward_zero_q_is_a_fixed_point() {
        let mut a = DqnAgent::new(small_cfg(), 2, 3, 1).unwrap();
        let zeros = a.online().zeros_like();
        a.set_online(zeros.clone()).unwrap();
        a.sync_target();
        let mut buf = ReplayBuffer::new(16);
        for i in 0..8 {
            buf.push(tr([0.1 * i as f64, 0.2], i % 3, 0.0, [0.3, 0.1]));
        }
        assert_eq!(a.train_step(&buf).unwrap(), 0.0);
        assert_eq!(a.online().flatten(), zeros.flatten());
    }

    #[test]
    fn train_step_needs_a_full_batch() {
        let mut a = DqnAgent::new(small_cfg(), 2, 3, 1).unwrap();
        let mut buf = ReplayBuffer::new(16);
        buf.push(tr([0.0, 0.0], 0, 1.0, [0.0, 0.0]));
        assert!(matches!(a.train_step(&buf), Err(Error::State(_))));
    }

    #[test]
    fn identical_agents_train_identically() {
        let mut buf = ReplayBuffer::new(16);
        for i in 0..10 {
            buf.push(tr(
                [0.1 * i as f64, 0.5],
                i % 3,
                i as f64,
                [0.2, 0.1 * i as f64],
            ));
        }
        let mut a = DqnAgent::new(small_cfg(), 2, 3, 8).unwrap();
        let mut b = a.clone();
        for _ in 0..5 {
            a.train_step(&buf).unwrap();
            b.train_step(&buf).unwrap();
        }
        assert_eq!(a.online().flatten(), b.online().flatten());
    }

    #[test]
    fn zero_upsilon_is_the_plain_update() {
        let batch: Vec<Transition> = (0..6)
            .map(|i| tr([0.1 * i as f64, 0.5], i % 3, 1.0, [0.2, 0.4]))
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let mut a = DqnAgent::new(small_cfg(), 2, 3, 8).unwrap();
        let mut b = a.clone();
        let reference = vec![0.7; a.online().len()];
        a.train_on_batch(&refs, None).unwrap();
        b.train_on_batch(&refs, Some((&reference, 0.0))).unwrap();
        assert_eq!(a.online().flatten(), b.online().flatten());
    }

    #[test]
    fn sync_then_ddqn_equals_dqn() {
        let mut buf = ReplayBuffer::new(32);
        for i in 0..20 {
            buf.push(tr(
                [0.05 * i as f64, 0.5],
                i % 4,
                0.3 * i as f64,
                [0.5, 0.05 * i as f64],
            ));
        }
        let cfg = AgentConfig {
            target_sync: 1000,
            ..small_cfg()
        };
        let mut a = DqnAgent::new(cfg, 2, 4, 3).unwrap();
        for _ in 0..10 {
            a.train_step(&buf).unwrap();
        }
        a.sync_target();
        let refs: Vec<&Transition> = buf.items().iter().collect();
        let d = td_targets(a.spec(), a.online(), a.target(), &refs, Algorithm::Dqn, 0.9).unwrap();
        let dd = td_targets(
            a.spec(),
            a.online(),
            a.target(),
            &refs,
            Algorithm::Ddqn,
            0.9,
        )
        .unwrap();
        assert_eq!(d, dd);
    }
}
