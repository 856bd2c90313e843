use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-step packet-count distribution of one slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalDist {
    /// Discrete uniform on `lo..=hi`.
    Uniform { lo: u32, hi: u32 },
    /// Exponential with mean `mean`, conditioned on `<= cap`, rounded.
    TruncatedExponential { mean: f64, cap: u32 },
    /// Exponential with mean `mean`, rounded to the nearest count.
    Exponential { mean: f64 },
}

impl ArrivalDist {
    /// Mean of the untruncated law; used to size the observation scale.
    pub fn nominal_mean(&self) -> f64 {
        match *self {
            ArrivalDist::Uniform { lo, hi } => (f64::from(lo) + f64::from(hi)) / 2.0,
            ArrivalDist::TruncatedExponential { mean, .. } | ArrivalDist::Exponential { mean } => {
                mean
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ArrivalDist::Uniform { lo, hi } if lo > hi => Err(Error::Config(format!(
                "uniform arrivals need lo <= hi, got {lo} > {hi}"
            ))),
            ArrivalDist::TruncatedExponential { mean, .. } | ArrivalDist::Exponential { mean }
                if !(mean > 0.0 && mean.is_finite()) =>
            {
                Err(Error::Config(format!(
                    "exponential mean must be positive, got {mean}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub name: String,
    /// Minimum serving rate in bits/s.
    pub rate_sla: f64,
    /// Maximum arrival-to-delivery latency in seconds.
    pub latency_sla: f64,
    pub arrival: ArrivalDist,
    /// Packet size in bits.
    pub packet_size: f64,
    /// Utility weight of this slice's SLA satisfaction ratio.
    pub beta: f64,
}

impl SliceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_sla > 0.0) {
            return Err(Error::Config(format!(
                "{}: rate_sla must be > 0",
                self.name
            )));
        }
        if !(self.latency_sla >= 0.0) {
            return Err(Error::Config(format!(
                "{}: latency_sla must be >= 0",
                self.name
            )));
        }
        if !(self.packet_size > 0.0) {
            return Err(Error::Config(format!(
                "{}: packet_size must be > 0",
                self.name
            )));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!("{}: beta must be >= 0", self.name)));
        }
        self.arrival.validate()
    }

    pub fn volte() -> Self {
        SliceSpec {
            name: "volte".into(),
            rate_sla: 51e3,
            latency_sla: 10e-3,
            arrival: ArrivalDist::Uniform { lo: 5, hi: 15 },
            packet_size: 320.0,
            beta: 1.0,
        }
    }

    pub fn video() -> Self {
        SliceSpec {
            name: "video".into(),
            rate_sla: 100e6,
            latency_sla: 10e-3,
            arrival: ArrivalDist::TruncatedExponential {
                mean: 20.0,
                cap: 60,
            },
            packet_size: 8000.0,
            beta: 1.0,
        }
    }

    pub fn urllc() -> Self {
        SliceSpec {
            name: "urllc".into(),
            rate_sla: 10e6,
            latency_sla: 1e-3,
            arrival: ArrivalDist::Exponential { mean: 10.0 },
            packet_size: 800.0,
            beta: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    /// Rates in bits/s.
    #[default]
    Two,
    /// Rates in nats/s.
    Natural,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub slices: Vec<SliceSpec>,
    /// Total downlink bandwidth in Hz.
    pub total_bandwidth: f64,
    /// Number of allocation units the band is divided into.
    pub units: usize,
    pub users_per_slice: Vec<usize>,
    pub cell_radius: f64,
    /// Users closer than this are placed at this distance (path-loss model floor).
    pub min_distance: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub slots_per_step: usize,
    pub slot_duration: f64,
    pub alpha: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub sigma: f64,
    /// Maximum number of unfinished packets a slice carries into the next step.
    pub backlog_cap: usize,
    pub log_base: LogBase,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            slices: vec![SliceSpec::volte(), SliceSpec::video(), SliceSpec::urllc()],
            total_bandwidth: 20e6,
            units: 100,
            users_per_slice: vec![34, 33, 33],
            cell_radius: 40.0,
            min_distance: 5.0,
            tx_power_dbm: 30.0,
            noise_psd_dbm_hz: -174.0,
            slots_per_step: 400,
            slot_duration: 0.5e-3,
            alpha: 0.01,
            gamma_min: 1.0,
            gamma_max: 2.0,
            sigma: 0.002,
            backlog_cap: 20,
            log_base: LogBase::Two,
        }
    }
}

impl EnvConfig {
    /// Desk-scale preset: 1 MHz units (171 actions) and a 0 dBm link budget, so
    /// that the allocation actually matters for the video slice.
    pub fn small() -> Self {
        EnvConfig {
            units: 20,
            tx_power_dbm: 0.0,
            ..Self::default()
        }
    }

    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    /// Bandwidth of one allocation unit in Hz.
    pub fn unit_bandwidth(&self) -> f64 {
        self.total_bandwidth / self.units as f64
    }

    pub fn step_duration(&self) -> f64 {
        self.slots_per_step as f64 * self.slot_duration
    }

    /// Demand count that maps to 1.0 in the normalised observation of slice `n`.
    pub fn norm_scale(&self, n: usize) -> f64 {
        3.0 * self.slices[n].arrival.nominal_mean() + self.backlog_cap as f64
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.slices.len();
        if n == 0 {
            return Err(Error::Config("at least one slice is required".into()));
        }
        for s in &self.slices {
            s.validate()?;
        }
        if self.units < n {
            return Err(Error::Config(format!(
                "units ({}) must be >= number of slices ({n})",
                self.units
            )));
        }
        if self.users_per_slice.len() != n || self.users_per_slice.contains(&0) {
            return Err(Error::Config(
                "users_per_slice needs one positive count per slice".into(),
            ));
        }
        if !(self.total_bandwidth > 0.0) || !(self.slot_duration > 0.0) || self.slots_per_step == 0
        {
            return Err(Error::Config(
                "bandwidth, slot duration and slots per step must be positive".into(),
            ));
        }
        if !(self.cell_radius > 0.0) || !(self.min_distance > 0.0) {
            return Err(Error::Config(
                "cell radius and min distance must be positive".into(),
            ));
        }
        if self.gamma_min > self.gamma_max {
            return Err(Error::Config(format!(
                "gamma_min ({}) must not exceed gamma_max ({})",
                self.gamma_min, self.gamma_max
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Config("sigma must be >= 0".into()));
        }
        Ok(())
    }
}
