use rand::Rng;

use super::{EnvConfig, LogBase};
use crate::{Error, Result};

/// Signal-to-noise ratio `g * P / (N0 * w)`.
pub fn compute_snr(gain: f64, power: f64, noise_psd: f64, bandwidth: f64) -> Result<f64> {
    if !(noise_psd > 0.0) || !(bandwidth > 0.0) {
        return Err(Error::Domain(format!(
            "snr needs positive noise psd and bandwidth, got N0={noise_psd} w={bandwidth}"
        )));
    }
    if !(gain >= 0.0) || !(power >= 0.0) {
        return Err(Error::Domain(format!(
            "snr needs nonnegative gain and power, got g={gain} P={power}"
        )));
    }
    Ok(gain * power / (noise_psd * bandwidth))
}

/// Shannon rate `w * log(1 + snr)` in the configured log base.
pub fn compute_user_rate(bandwidth: f64, snr: f64, base: LogBase) -> Result<f64> {
    if !(bandwidth >= 0.0) || !(snr >= 0.0) {
        return Err(Error::Domain(format!(
            "rate needs nonnegative bandwidth and snr, got w={bandwidth} snr={snr}"
        )));
    }
    Ok(match base {
        LogBase::Two => bandwidth * snr.ln_1p() / std::f64::consts::LN_2,
        LogBase::Natural => bandwidth * snr.ln_1p(),
    })
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Linear path gain of the urban-macro model `128.1 + 37.6 log10(d_km)` dB.
pub fn path_gain(distance_m: f64) -> f64 {
    let loss_db = 128.1 + 37.6 * (distance_m / 1000.0).log10();
    10f64.powf(-loss_db / 10.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct User {
    pub slice: usize,
    pub distance: f64,
    pub path_gain: f64,
}

/// User placement, fixed for the lifetime of one environment run.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub users: Vec<User>,
    /// Global user indices belonging to each slice.
    pub slice_users: Vec<Vec<usize>>,
}

impl Cell {
    /// Places users uniformly over the disc of the configured radius.
    pub fn place<R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> Self {
        let mut users = Vec::new();
        let mut slice_users = Vec::with_capacity(cfg.num_slices());
        for (slice, &count) in cfg.users_per_slice.iter().enumerate() {
            let mut ids = Vec::with_capacity(count);
            for _ in 0..count {
                let u: f64 = rng.random();
                let distance = (cfg.cell_radius * u.sqrt()).max(cfg.min_distance);
                ids.push(users.len());
                users.push(User {
                    slice,
                    distance,
                    path_gain: path_gain(distance),
                });
            }
            slice_users.push(ids);
        }
        Cell { users, slice_users }
    }

    /// A cell where every user sits at the same path gain; handy for hand-checked cases.
    pub fn uniform(users_per_slice: &[usize], path_gain: f64) -> Self {
        let mut users = Vec::new();
        let mut slice_users = Vec::new();
        for (slice, &count) in users_per_slice.iter().enumerate() {
            let ids = (users.len()..users.len() + count).collect();
            users.extend((0..count).map(|_| User {
                slice,
                distance: 0.0,
                path_gain,
            }));
            slice_users.push(ids);
        }
        Cell { users, slice_users }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn snr_cases() {
        assert_eq!(compute_snr(1.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(compute_snr(0.0, 3.0, 1.0, 5.0).unwrap(), 0.0);
        assert_eq!(compute_snr(2.0, 3.0, 1.5, 2.0).unwrap(), 2.0);
        assert!(matches!(
            compute_snr(1.0, 1.0, 1.0, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            compute_snr(1.0, 1.0, 0.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            compute_snr(-1.0, 1.0, 1.0, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rate_cases() {
        assert_eq!(compute_user_rate(3e6, 0.0, LogBase::Two).unwrap(), 0.0);
        assert_relative_eq!(
            compute_user_rate(1e6, 1.0, LogBase::Two).unwrap(),
            1e6,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            compute_user_rate(1e6, 3.0, LogBase::Two).unwrap(),
            2e6,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            compute_user_rate(1e6, std::f64::consts::E - 1.0, LogBase::Natural).unwrap(),
            1e6,
            max_relative = 1e-12
        );
        assert!(compute_user_rate(-1.0, 1.0, LogBase::Two).is_err());
        assert!(compute_user_rate(1.0, -1.0, LogBase::Two).is_err());
    }

    #[test]
    fn path_loss_reference_point() {
        // 1 km is the 128.1 dB anchor of the model
        assert_relative_eq!(path_gain(1000.0), 10f64.powf(-12.81), max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watts(30.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn placement_inside_disc() {
        use rand::SeedableRng;
        let cfg = EnvConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let cell = Cell::place(&cfg, &mut rng);
        assert_eq!(cell.users.len(), 100);
        assert!(cell
            .users
            .iter()
            .all(|u| u.distance >= cfg.min_distance && u.distance <= cfg.cell_radius));
        assert_eq!(cell.slice_users[1].len(), 33);
    }
}
