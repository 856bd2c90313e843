use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{
    compute_metrics, sample_arrivals, shape_reward, simulate_window, ActionCodec, Cell, EnvConfig,
    PacketRecord,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Packets (fresh arrivals plus carried backlog) per slice for the coming window.
    pub demand: Vec<u32>,
    /// `clip(demand / norm_scale, 0, 1)` per slice.
    pub normalized: Vec<f64>,
}

impl Observation {
    pub fn from_demand(demand: Vec<u32>, cfg: &EnvConfig) -> Self {
        let normalized = demand
            .iter()
            .enumerate()
            .map(|(n, &d)| (f64::from(d) / cfg.norm_scale(n)).clamp(0.0, 1.0))
            .collect();
        Observation { demand, normalized }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Global step index at which this transition happened.
    pub t: u64,
    pub alloc: Vec<usize>,
    pub se: f64,
    pub ssr: Vec<f64>,
    pub utility: f64,
    pub reward: f64,
    pub next_obs: Observation,
}

/// Seeded single-cell slicing environment. The task is continuing: there are no terminal states.
#[derive(Clone, Debug)]
pub struct SlicingEnv {
    cfg: EnvConfig,
    codec: ActionCodec,
    state: Option<Running>,
}

#[derive(Clone, Debug)]
struct Running {
    rng: ChaCha8Rng,
    cell: Cell,
    pending: Vec<PacketRecord>,
    obs: Observation,
    t: u64,
}

impl SlicingEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let codec = ActionCodec::new(cfg.units, cfg.num_slices())?;
        Ok(SlicingEnv {
            cfg,
            codec,
            state: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn codec(&self) -> &ActionCodec {
        &self.codec
    }

    pub fn num_actions(&self) -> usize {
        self.codec.count()
    }

    /// Number of real steps taken since the last reset.
    pub fn steps(&self) -> u64 {
        self.state.as_ref().map_or(0, |s| s.t)
    }

    pub fn observation(&self) -> Option<&Observation> {
        self.state.as_ref().map(|s| &s.obs)
    }

    pub fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = Cell::place(&self.cfg, &mut rng);
        let pending = draw_arrivals(&self.cfg, &cell, &mut rng, Vec::new());
        let obs = demand_of(&pending, &self.cfg);
        self.state = Some(Running {
            rng,
            cell,
            pending,
            obs: obs.clone(),
            t: 0,
        });
        obs
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let cfg = &self.cfg;
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::State("step called before reset".into()))?;
        let alloc = self.codec.decode(action)?;
        let unit = cfg.unit_bandwidth();
        let alloc_hz: Vec<f64> = alloc.iter().map(|&u| u as f64 * unit).collect();

        let Running { rng, cell, .. } = state;
        let packets = std::mem::take(&mut state.pending);
        let window = simulate_window(
            &alloc_hz,
            packets,
            cell,
            |user, _slot| {
                let fade: f64 = Exp1.sample(rng);
                cell.users[user].path_gain * fade
            },
            cfg,
        )?;
        let metrics = compute_metrics(&window.records, &window.slice_rates, cfg);
        let t = state.t;
        let reward = shape_reward(metrics.utility, t, cfg);
        state.t += 1;

        state.pending = draw_arrivals(cfg, &state.cell, &mut state.rng, window.backlog);
        state.obs = demand_of(&state.pending, cfg);
        Ok(StepOutcome {
            t,
            alloc,
            se: metrics.se,
            ssr: metrics.ssr,
            utility: metrics.utility,
            reward,
            next_obs: state.obs.clone(),
        })
    }
}

fn draw_arrivals(
    cfg: &EnvConfig,
    cell: &Cell,
    rng: &mut ChaCha8Rng,
    mut packets: Vec<PacketRecord>,
) -> Vec<PacketRecord> {
    for (slice, spec) in cfg.slices.iter().enumerate() {
        let count = sample_arrivals(spec, rng);
        let members = &cell.slice_users[slice];
        for _ in 0..count {
            let user = members[rng.random_range(0..members.len())];
            let slot = rng.random_range(0..cfg.slots_per_step);
            packets.push(PacketRecord::new(slice, user, slot, spec.packet_size));
        }
    }
    packets
}

fn demand_of(packets: &[PacketRecord], cfg: &EnvConfig) -> Observation {
    let mut demand = vec![0u32; cfg.num_slices()];
    for p in packets {
        demand[p.slice] += 1;
    }
    Observation::from_demand(demand, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ArrivalDist;

    fn small() -> EnvConfig {
        EnvConfig {
            units: 20,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn step_before_reset() {
        let mut env = SlicingEnv::new(small()).unwrap();
        assert!(matches!(env.step(0), Err(Error::State(_))));
    }

    #[test]
    fn seeded_determinism() {
        let mut a = SlicingEnv::new(small()).unwrap();
        let mut b = SlicingEnv::new(small()).unwrap();
        let oa = a.reset(42);
        let ob = b.reset(42);
        assert_eq!(
            serde_json::to_string(&oa).unwrap(),
            serde_json::to_string(&ob).unwrap()
        );
        for i in 0..100 {
            let action = (i * 37) % a.num_actions();
            let sa = a.step(action).unwrap();
            let sb = b.step(action).unwrap();
            assert_eq!(sa.reward.to_bits(), sb.reward.to_bits());
            assert_eq!(sa.utility.to_bits(), sb.utility.to_bits());
            assert_eq!(
                serde_json::to_string(&sa.next_obs).unwrap(),
                serde_json::to_string(&sb.next_obs).unwrap()
            );
        }
    }

    #[test]
    fn silent_network() {
        let mut cfg = small();
        for s in &mut cfg.slices {
            s.arrival = ArrivalDist::Uniform { lo: 0, hi: 0 };
        }
        let mut env = SlicingEnv::new(cfg).unwrap();
        env.reset(1);
        for a in [0, 50, 170] {
            let out = env.step(a).unwrap();
            assert_eq!(out.ssr, vec![1.0, 1.0, 1.0]);
            assert_eq!(out.se, 0.0);
            assert_eq!(out.utility, 3.0);
        }
    }

    #[test]
    fn allocations_conserve_bandwidth() {
        let mut env = SlicingEnv::new(small()).unwrap();
        env.reset(3);
        for a in 0..env.num_actions() {
            let out = env.step(a).unwrap();
            assert_eq!(out.alloc.iter().sum::<usize>(), 20);
            assert!(out.alloc.iter().all(|&u| u >= 1));
            assert!(out.ssr.iter().all(|u| (0.0..=1.0).contains(u)));
        }
    }

    #[test]
    fn busy_slice_prefers_bandwidth() {
        // only video carries traffic; giving it everything but the minimum beats a uniform split
        let mut cfg = small();
        cfg.slices[0].arrival = ArrivalDist::Uniform { lo: 0, hi: 0 };
        cfg.slices[2].arrival = ArrivalDist::Uniform { lo: 0, hi: 0 };
        cfg.slices[1].arrival = ArrivalDist::Uniform { lo: 30, hi: 30 };
        let run = |alloc: [usize; 3]| {
            let mut env = SlicingEnv::new(cfg.clone()).unwrap();
            env.reset(9);
            let a = env.codec().encode(&alloc).unwrap();
            (0..50).map(|_| env.step(a).unwrap().utility).sum::<f64>()
        };
        let busy = run([1, 18, 1]);
        let even = run([7, 7, 6]);
        assert!(busy >= even, "busy {busy} even {even}");
    }
}
