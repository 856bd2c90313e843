use super::{EnvConfig, PacketRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct SliceMetrics {
    /// Spectrum efficiency: summed achieved user rates over the total band.
    pub se: f64,
    pub se_per_slice: Vec<f64>,
    /// SLA satisfaction ratio per slice; a slice with no arrivals scores 1.
    pub ssr: Vec<f64>,
    pub utility: f64,
}

/// SE, per-slice SSR and utility `alpha * se + sum(beta_n * u_n)` for one step.
pub fn compute_metrics(
    records: &[PacketRecord],
    slice_rates: &[f64],
    cfg: &EnvConfig,
) -> SliceMetrics {
    let n = cfg.num_slices();
    let mut ok = vec![0usize; n];
    let mut total = vec![0usize; n];
    for r in records.iter().filter(|r| !r.carried) {
        total[r.slice] += 1;
        ok[r.slice] += usize::from(r.success);
    }
    let ssr: Vec<f64> = ok
        .iter()
        .zip(&total)
        .map(|(&k, &m)| if m == 0 { 1.0 } else { k as f64 / m as f64 })
        .collect();
    let se_per_slice: Vec<f64> = slice_rates
        .iter()
        .map(|r| r / cfg.total_bandwidth)
        .collect();
    let se = se_per_slice.iter().sum::<f64>();
    let utility = cfg.alpha * se
        + cfg
            .slices
            .iter()
            .zip(&ssr)
            .map(|(s, u)| s.beta * u)
            .sum::<f64>();
    SliceMetrics {
        se,
        se_per_slice,
        ssr,
        utility,
    }
}
