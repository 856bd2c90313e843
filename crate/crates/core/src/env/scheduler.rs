use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{compute_snr, compute_user_rate, dbm_to_watts, Cell, EnvConfig};
use crate::{Error, Result};

const BIT_EPS: f64 = 1e-9;

/// One packet inside a step window and, once simulated, its delivery result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub slice: usize,
    /// Global user index in the [`Cell`].
    pub user: usize,
    /// Arrival slot inside the window; arrival time is `slot * slot_duration`.
    pub arrival_slot: usize,
    pub size: f64,
    pub remaining: f64,
    /// Delivery time in seconds from the window start, if the last bit went out.
    pub delivered_time: Option<f64>,
    pub success: bool,
    /// Carried over from an earlier window; already counted as failed there.
    pub carried: bool,
    rate_sum: f64,
    served_slots: u32,
}

impl PacketRecord {
    pub fn new(slice: usize, user: usize, arrival_slot: usize, size: f64) -> Self {
        PacketRecord {
            slice,
            user,
            arrival_slot,
            size,
            remaining: size,
            delivered_time: None,
            success: false,
            carried: false,
            rate_sum: 0.0,
            served_slots: 0,
        }
    }

    pub fn arrival_time(&self, cfg: &EnvConfig) -> f64 {
        self.arrival_slot as f64 * cfg.slot_duration
    }

    /// Mean instantaneous rate over the slots this packet received bits in.
    pub fn serving_rate(&self) -> f64 {
        if self.served_slots == 0 {
            0.0
        } else {
            self.rate_sum / f64::from(self.served_slots)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowOutcome {
    /// Packets that arrived fresh in this window; these drive the SLA ratios.
    pub records: Vec<PacketRecord>,
    /// Sum over each slice's users of achieved throughput (bits/s) over the window.
    pub slice_rates: Vec<f64>,
    /// Unfinished packets re-queued at slot 0 of the next window.
    pub backlog: Vec<PacketRecord>,
}

/// Serves one step window.
///
/// Each slice schedules one backlogged user per slot in round-robin order; the
/// scheduled user transmits at the Shannon rate of the whole slice bandwidth
/// for one slot. `channel(user, slot)` returns the instantaneous channel gain.
pub fn simulate_window<F>(
    alloc_hz: &[f64],
    packets: Vec<PacketRecord>,
    cell: &Cell,
    mut channel: F,
    cfg: &EnvConfig,
) -> Result<WindowOutcome>
where
    F: FnMut(usize, usize) -> f64,
{
    let n = cfg.num_slices();
    if alloc_hz.len() != n {
        return Err(Error::Validation(format!(
            "allocation has {} entries for {n} slices",
            alloc_hz.len()
        )));
    }
    if alloc_hz.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Validation(
            "every slice needs positive bandwidth".into(),
        ));
    }
    let total: f64 = alloc_hz.iter().sum();
    if (total - cfg.total_bandwidth).abs() > 1e-9 * cfg.total_bandwidth {
        return Err(Error::Validation(format!(
            "allocation sums to {total} Hz, band is {} Hz",
            cfg.total_bandwidth
        )));
    }
    if let Some(p) = packets
        .iter()
        .find(|p| p.arrival_slot >= cfg.slots_per_step)
    {
        return Err(Error::Validation(format!(
            "packet arrives at slot {} outside the {}-slot window",
            p.arrival_slot, cfg.slots_per_step
        )));
    }

    let power = dbm_to_watts(cfg.tx_power_dbm);
    let noise = dbm_to_watts(cfg.noise_psd_dbm_hz);
    let deadline_slots = (cfg.slices[0..n]
        .iter()
        .map(|s| (s.latency_sla / cfg.slot_duration + 1e-9).floor() as usize))
    .collect::<Vec<_>>();

    let mut packets = packets;
    // per-user FIFO of packet indices, ordered by arrival
    let mut order: Vec<usize> = (0..packets.len()).collect();
    order.sort_by_key(|&i| (packets[i].arrival_slot, !packets[i].carried, i));
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); cell.users.len()];
    for i in order {
        queues[packets[i].user].push_back(i);
    }
    let mut cursor: Vec<usize> = cell.slice_users.iter().map(|u| u.len() - 1).collect();
    let mut delivered_bits = vec![0.0; n];

    for slot in 0..cfg.slots_per_step {
        for slice in 0..n {
            let members = &cell.slice_users[slice];
            let ready = |u: usize| {
                queues[u]
                    .front()
                    .is_some_and(|&p| packets[p].arrival_slot <= slot)
            };
            let Some(pick) = (1..=members.len())
                .map(|k| (cursor[slice] + k) % members.len())
                .find(|&k| ready(members[k]))
            else {
                continue;
            };
            cursor[slice] = pick;
            let user = members[pick];
            let w = alloc_hz[slice];
            let snr = compute_snr(channel(user, slot), power, noise, w)?;
            let rate = compute_user_rate(w, snr, cfg.log_base)?;
            let mut budget = rate * cfg.slot_duration;
            while budget > BIT_EPS {
                let Some(&p) = queues[user].front() else {
                    break;
                };
                let pkt = &mut packets[p];
                if pkt.arrival_slot > slot {
                    break;
                }
                let sent = budget.min(pkt.remaining);
                pkt.remaining -= sent;
                pkt.rate_sum += rate;
                pkt.served_slots += 1;
                budget -= sent;
                delivered_bits[slice] += sent;
                if pkt.remaining <= BIT_EPS {
                    pkt.remaining = 0.0;
                    pkt.delivered_time = Some((slot + 1) as f64 * cfg.slot_duration);
                    let latency_slots = slot + 1 - pkt.arrival_slot;
                    pkt.success = latency_slots <= deadline_slots[slice]
                        && pkt.serving_rate() >= cfg.slices[slice].rate_sla;
                    queues[user].pop_front();
                }
            }
        }
    }

    let step = cfg.step_duration();
    let slice_rates = delivered_bits.iter().map(|b| b / step).collect();
    let mut records = Vec::new();
    let mut backlog = Vec::new();
    let mut carried_per_slice = vec![0usize; n];
    for pkt in packets {
        if pkt.delivered_time.is_none() && carried_per_slice[pkt.slice] < cfg.backlog_cap {
            carried_per_slice[pkt.slice] += 1;
            let mut next = PacketRecord::new(pkt.slice, pkt.user, 0, pkt.size);
            next.remaining = pkt.remaining;
            next.carried = true;
            backlog.push(next);
        }
        if !pkt.carried {
            records.push(pkt);
        }
    }
    Ok(WindowOutcome {
        records,
        slice_rates,
        backlog,
    })
}
