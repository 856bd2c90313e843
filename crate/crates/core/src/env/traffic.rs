use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{ArrivalDist, SliceSpec};

/// Draws the number of packets a slice receives during one step window.
pub fn sample_arrivals<R: Rng + ?Sized>(spec: &SliceSpec, rng: &mut R) -> u32 {
    match spec.arrival {
        ArrivalDist::Uniform { lo, hi } => rng.random_range(lo..=hi),
        ArrivalDist::TruncatedExponential { mean, cap } => {
            // inverse CDF of the exponential restricted to [0, cap]
            let mass = 1.0 - (-f64::from(cap) / mean).exp();
            let u: f64 = rng.random();
            let x = -mean * (1.0 - u * mass).ln();
            (x.round() as u32).min(cap)
        }
        ArrivalDist::Exponential { mean } => {
            let x = Exp::new(1.0 / mean).expect("validated mean").sample(rng);
            x.round() as u32
        }
    }
}
