use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which part of a run produced a real-environment step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Collect,
    Train,
    Eval,
}

/// One real-environment interaction, as written to the transition log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub obs: Vec<f64>,
    pub action_index: usize,
    pub alloc: Vec<usize>,
    pub se: f64,
    pub ssr: Vec<f64>,
    pub utility: f64,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub episode: u64,
    pub phase: Phase,
    /// Twin steps taken by the run when this step happened.
    #[serde(default)]
    pub twin_interactions: u64,
}

/// Per-round aggregate of real-environment interactions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub round: usize,
    pub mean_reward: f64,
    pub mean_utility: f64,
    pub mean_se: f64,
    pub ssr: Vec<f64>,
    pub real_interactions: u64,
    pub twin_interactions: u64,
}

/// Streaming round aggregation; a partial trailing block never emits a row.
#[derive(Clone, Debug)]
pub struct RoundAggregator {
    round_size: usize,
    rows: usize,
    seen: u64,
    count: usize,
    reward: f64,
    utility: f64,
    se: f64,
    ssr: Vec<f64>,
}

impl RoundAggregator {
    pub fn new(round_size: usize) -> Result<Self> {
        if round_size == 0 {
            return Err(Error::Validation("round size must be >= 1".into()));
        }
        Ok(RoundAggregator {
            round_size,
            rows: 0,
            seen: 0,
            count: 0,
            reward: 0.0,
            utility: 0.0,
            se: 0.0,
            ssr: Vec::new(),
        })
    }

    pub fn push(&mut self, rec: &StepRecord) -> Option<MetricsRow> {
        if self.count == 0 {
            self.ssr = vec![0.0; rec.ssr.len()];
        }
        self.seen += 1;
        self.count += 1;
        self.reward += rec.reward;
        self.utility += rec.utility;
        self.se += rec.se;
        for (acc, v) in self.ssr.iter_mut().zip(&rec.ssr) {
            *acc += v;
        }
        if self.count < self.round_size {
            return None;
        }
        let n = self.count as f64;
        let row = MetricsRow {
            round: self.rows,
            mean_reward: self.reward / n,
            mean_utility: self.utility / n,
            mean_se: self.se / n,
            ssr: self.ssr.iter().map(|v| v / n).collect(),
            real_interactions: self.seen,
            twin_interactions: rec.twin_interactions,
        };
        self.rows += 1;
        self.count = 0;
        self.reward = 0.0;
        self.utility = 0.0;
        self.se = 0.0;
        Some(row)
    }
}

/// Batch form of [`RoundAggregator`].
pub fn aggregate_rounds(records: &[StepRecord], round_size: usize) -> Result<Vec<MetricsRow>> {
    let mut agg = RoundAggregator::new(round_size)?;
    Ok(records.iter().filter_map(|r| agg.push(r)).collect())
}

/// Real interactions consumed when the trailing `window`-round mean reward
/// first reaches `target`, if it ever does.
pub fn interactions_to_reach(rows: &[MetricsRow], target: f64, window: usize) -> Option<u64> {
    if window == 0 || rows.len() < window {
        return None;
    }
    (window - 1..rows.len()).find_map(|end| {
        let mean = rows[end + 1 - window..=end]
            .iter()
            .map(|r| r.mean_reward)
            .sum::<f64>()
            / window as f64;
        (mean >= target).then_some(rows[end].real_interactions)
    })
}

/// Mean reward over the last `window` rounds.
pub fn final_mean_reward(rows: &[MetricsRow], window: usize) -> Option<f64> {
    if window == 0 || rows.len() < window {
        return None;
    }
    let tail = &rows[rows.len() - window..];
    Some(tail.iter().map(|r| r.mean_reward).sum::<f64>() / window as f64)
}

/// Writes one JSON document per line.
pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::Schema(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a line-delimited JSON file; blank lines are skipped.
pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut offset = 0usize;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            let item = serde_json::from_str(&line).map_err(|e| Error::Parse {
                msg: e.to_string(),
                line: i + 1,
                column: e.column(),
                offset: offset + e.column().saturating_sub(1),
            })?;
            out.push(item);
        }
        offset += line.len() + 1;
    }
    Ok(out)
}
