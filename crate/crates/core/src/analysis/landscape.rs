use serde::{Deserialize, Serialize};

use crate::agent::{DqnAgent, Transition};
use crate::nn::ParamSet;
use crate::par::{self, Exec};
use crate::{Error, Result};

/// A scalar objective over a flat parameter vector.
pub trait Objective: Sync {
    fn loss(&self, theta: &[f64]) -> Result<f64>;
    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>>;
}

/// The agent's TD loss on a fixed batch with targets frozen at the scan origin.
pub struct TdObjective<'a> {
    agent: &'a DqnAgent,
    batch: Vec<&'a Transition>,
    targets: Vec<f64>,
    template: ParamSet,
}

impl<'a> TdObjective<'a> {
    pub fn new(agent: &'a DqnAgent, batch: Vec<&'a Transition>) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::Validation("landscape batch is empty".into()));
        }
        let targets = agent.targets(&batch)?;
        Ok(TdObjective {
            agent,
            batch,
            targets,
            template: agent.online().clone(),
        })
    }
}

impl Objective for TdObjective<'_> {
    fn loss(&self, theta: &[f64]) -> Result<f64> {
        let p = ParamSet::unflatten(theta, &self.template)?;
        self.agent.td_loss(&p, &self.batch, &self.targets)
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let p = ParamSet::unflatten(theta, &self.template)?;
        Ok(self
            .agent
            .td_loss_grad(&p, &self.batch, &self.targets)?
            .1
            .flatten())
    }
}

/// `||theta||^2 / 2`, whose gradient is `theta`.
pub struct Quadratic;

impl Objective for Quadratic {
    fn loss(&self, theta: &[f64]) -> Result<f64> {
        Ok(0.5 * theta.iter().map(|v| v * v).sum::<f64>())
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(theta.to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeScan {
    pub lambdas: Vec<f64>,
    pub losses: Vec<f64>,
    pub base_loss: f64,
    /// Norm of the raw gradient; the scan direction is the gradient divided by it.
    pub grad_norm: f64,
    /// Set when the gradient vanished and the direction is zero.
    pub degenerate: bool,
}

/// `points` evenly spaced values from `min` to `max` inclusive.
pub fn lambda_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 || !(min <= max) || !min.is_finite() || !max.is_finite() {
        return Err(Error::Validation(format!(
            "bad lambda grid [{min}, {max}] x {points}"
        )));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let step = (max - min) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                max
            } else {
                min + step * i as f64
            }
        })
        .collect())
}

/// Loss along the unit gradient direction `v`: `lambda -> L(theta + lambda v)`.
/// `theta` is never modified.
pub fn scan(
    objective: &impl Objective,
    theta: &[f64],
    lambdas: &[f64],
    exec: Exec,
) -> Result<LandscapeScan> {
    let base_loss = objective.loss(theta)?;
    let g = objective.gradient(theta)?;
    let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let degenerate = grad_norm == 0.0 || !grad_norm.is_finite();
    let v: Vec<f64> = if degenerate {
        vec![0.0; g.len()]
    } else {
        g.iter().map(|x| x / grad_norm).collect()
    };
    let losses = par::map(exec, lambdas, |&lam| {
        let moved: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t + lam * d).collect();
        objective.loss(&moved)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(LandscapeScan {
        lambdas: lambdas.to_vec(),
        losses,
        base_loss,
        grad_norm,
        degenerate,
    })
}

/// Mean second difference of the curve divided by the squared grid step;
/// `None` for fewer than three points or an irregular grid.
pub fn curvature(scan: &LandscapeScan) -> Option<f64> {
    let n = scan.lambdas.len();
    if n < 3 {
        return None;
    }
    let h = scan.lambdas[1] - scan.lambdas[0];
    if !(h > 0.0) {
        return None;
    }
    let total: f64 = (1..n - 1)
        .map(|i| scan.losses[i - 1] - 2.0 * scan.losses[i] + scan.losses[i + 1])
        .sum();
    Some(total / ((n - 2) as f64 * h * h))
}
