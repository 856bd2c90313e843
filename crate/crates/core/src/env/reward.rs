use super::EnvConfig;

/// Threshold `min(gamma_min + sigma * t, gamma_max)` at real step `t`.
pub fn reward_threshold(t: u64, cfg: &EnvConfig) -> f64 {
    (cfg.gamma_min + cfg.sigma * t as f64).min(cfg.gamma_max)
}

/// Piecewise reward shaping of a utility value.
pub fn shape_reward(utility: f64, t: u64, cfg: &EnvConfig) -> f64 {
    let threshold = reward_threshold(t, cfg);
    if utility < threshold {
        0.0
    } else if utility < cfg.gamma_max {
        1.0
    } else {
        1.0 + (utility - cfg.gamma_max) / 2.0
    }
}
