use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{Loss, LstmSpec, MlpSpec, ParamSet};
use crate::{Error, Result};

/// Architectures whose analytic gradients this crate provides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arch {
    Mlp(MlpSpec),
    Lstm(LstmSpec),
}

/// A batch in the layout the architecture consumes.
#[derive(Clone, Debug)]
pub enum Input<'a> {
    /// `batch x width`.
    Flat(ArrayView2<'a, f64>),
    /// One `batch x width` matrix per time step.
    Seq(Vec<ArrayView2<'a, f64>>),
}

impl Arch {
    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        match self {
            Arch::Mlp(s) => s.check_params(params),
            Arch::Lstm(s) => s.check_params(params),
        }
    }

    pub fn forward(&self, params: &ParamSet, input: &Input<'_>) -> Result<Array2<f64>> {
        match (self, input) {
            (Arch::Mlp(s), Input::Flat(x)) => s.forward(params, *x),
            (Arch::Lstm(s), Input::Seq(xs)) => Ok(s.forward(params, xs, None)?.0),
            _ => Err(Error::Shape(
                "input layout does not match the architecture".into(),
            )),
        }
    }

    pub fn loss(&self, params: &ParamSet, input: &Input<'_>, loss: &Loss<'_>) -> Result<f64> {
        Ok(loss.evaluate(&self.forward(params, input)?)?.0)
    }

    /// Loss value and exact gradients with respect to every parameter.
    pub fn compute_gradients(
        &self,
        params: &ParamSet,
        input: &Input<'_>,
        loss: &Loss<'_>,
    ) -> Result<(f64, ParamSet)> {
        match (self, input) {
            (Arch::Mlp(s), Input::Flat(x)) => {
                let cache = s.forward_cached(params, *x)?;
                let (value, d_out) = loss.evaluate(&cache.output)?;
                Ok((value, s.backward(params, &cache, &d_out)?))
            }
            (Arch::Lstm(s), Input::Seq(xs)) => {
                let cache = s.forward_cached(params, xs, None)?;
                let (value, d_out) = loss.evaluate(&cache.output)?;
                Ok((value, s.backward(params, &cache, &d_out)?))
            }
            _ => Err(Error::Shape(
                "input layout does not match the architecture".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst entry.
    pub worst: (String, usize),
    pub checked: usize,
    pub passed: bool,
}

/// Central finite differences of the loss for every parameter.
pub fn finite_difference_gradients(
    arch: &Arch,
    params: &ParamSet,
    input: &Input<'_>,
    loss: &Loss<'_>,
    h: f64,
) -> Result<ParamSet> {
    let mut probe = params.clone();
    let mut grads = params.zeros_like();
    let names: Vec<String> = params.tensors.keys().cloned().collect();
    for name in &names {
        for k in 0..params.get(name)?.len() {
            let orig = params.get(name)?.data[k];
            probe.get_mut(name)?.data[k] = orig + h;
            let up = arch.loss(&probe, input, loss)?;
            probe.get_mut(name)?.data[k] = orig - h;
            let down = arch.loss(&probe, input, loss)?;
            probe.get_mut(name)?.data[k] = orig;
            grads.get_mut(name)?.data[k] = (up - down) / (2.0 * h);
        }
    }
    Ok(grads)
}

/// Denominator floor so entries with both gradients near zero compare absolutely.
const REL_FLOOR: f64 = 1e-6;

/// Largest `|a - n| / max(|a|, |n|, 1e-6)` across all entries.
pub fn compare_gradients(
    analytic: &ParamSet,
    numeric: &ParamSet,
    tolerance: f64,
) -> Result<GradCheckReport> {
    analytic.check_compatible(numeric)?;
    let mut worst = (String::new(), 0);
    let mut max_rel = 0.0f64;
    let mut checked = 0;
    for ((name, a), n) in analytic.tensors.iter().zip(numeric.tensors.values()) {
        for (k, (&x, &y)) in a.data.iter().zip(&n.data).enumerate() {
            let rel = (x - y).abs() / x.abs().max(y.abs()).max(REL_FLOOR);
            checked += 1;
            if rel > max_rel || worst.0.is_empty() {
                max_rel = max_rel.max(rel);
                worst = (name.clone(), k);
            }
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        worst,
        checked,
        passed: max_rel < tolerance,
    })
}

/// Compares analytic gradients to central differences with step `1e-5`.
pub fn gradient_check(
    arch: &Arch,
    params: &ParamSet,
    input: &Input<'_>,
    loss: &Loss<'_>,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = arch.compute_gradients(params, input, loss)?;
    let numeric = finite_difference_gradients(arch, params, input, loss, 1e-5)?;
    compare_gradients(&analytic, &numeric, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let arch = Arch::Mlp(MlpSpec::new(vec![3, 4, 2]).unwrap());
        let Arch::Mlp(spec) = &arch else {
            unreachable!()
        };
        let params = spec.init(&mut rng);
        let x = random_matrix(&mut rng, 5, 3);
        let t = random_matrix(&mut rng, 5, 2);
        let input = Input::Flat(x.view());
        for loss in [
            Loss::Mse { targets: t.view() },
            Loss::CrossEntropy {
                labels: &[0, 1, 1, 0, 1],
            },
            Loss::Td {
                actions: &[1, 0, 0, 1, 1],
                targets: &[0.5, -0.2, 1.0, 0.0, 0.3],
            },
        ] {
            let report = gradient_check(&arch, &params, &input, &loss, 1e-4).unwrap();
            assert!(report.passed, "{:?}: {report:?}", loss.kind());
        }
    }

    #[test]
    fn lstm_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = LstmSpec {
            input: 2,
            hidden: 3,
            output: 2,
        };
        let params = spec.init(&mut rng);
        let arch = Arch::Lstm(spec);
        let seq: Vec<Array2<f64>> = (0..4).map(|_| random_matrix(&mut rng, 3, 2)).collect();
        let input = Input::Seq(seq.iter().map(|a| a.view()).collect());
        let t = random_matrix(&mut rng, 3, 2);
        let report = gradient_check(
            &arch,
            &params,
            &input,
            &Loss::Mse { targets: t.view() },
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = MlpSpec::new(vec![2, 3, 1]).unwrap();
        let params = spec.init(&mut rng);
        let x = random_matrix(&mut rng, 4, 2);
        let y = spec.forward(&params, x.view()).unwrap();
        let arch = Arch::Mlp(spec);
        let (v, g) = arch
            .compute_gradients(
                &params,
                &Input::Flat(x.view()),
                &Loss::Mse { targets: y.view() },
            )
            .unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn scaling_loss_scales_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = MlpSpec::new(vec![2, 3, 2]).unwrap();
        let params = spec.init(&mut rng);
        let x = random_matrix(&mut rng, 4, 2);
        let t = random_matrix(&mut rng, 4, 2);
        let arch = Arch::Mlp(spec);
        let input = Input::Flat(x.view());
        let (_, g1) = arch
            .compute_gradients(&params, &input, &Loss::Mse { targets: t.view() })
            .unwrap();
        let scaled = Loss::Scaled {
            factor: 3.0,
            inner: Box::new(Loss::Mse { targets: t.view() }),
        };
        let (_, g3) = arch.compute_gradients(&params, &input, &scaled).unwrap();
        for (a, b) in g1.flatten().iter().zip(g3.flatten()) {
            assert!((3.0 * a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn corrupted_gradient_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = MlpSpec::new(vec![3, 4, 2]).unwrap();
        let params = spec.init(&mut rng);
        let x = random_matrix(&mut rng, 5, 3);
        let t = random_matrix(&mut rng, 5, 2);
        let arch = Arch::Mlp(spec);
        let input = Input::Flat(x.view());
        let loss = Loss::Mse { targets: t.view() };
        let (_, mut analytic) = arch.compute_gradients(&params, &input, &loss).unwrap();
        let numeric = finite_difference_gradients(&arch, &params, &input, &loss, 1e-5).unwrap();
        assert!(compare_gradients(&analytic, &numeric, 1e-4).unwrap().passed);
        analytic.get_mut("layer01.b").unwrap().data[0] *= 2.0;
        assert!(!compare_gradients(&analytic, &numeric, 1e-4).unwrap().passed);
    }

    #[test]
    fn layout_mismatch() {
        let arch = Arch::Lstm(LstmSpec {
            input: 1,
            hidden: 1,
            output: 1,
        });
        let x = Array2::<f64>::zeros((1, 1));
        assert!(arch
            .forward(&arch_zero(&arch), &Input::Flat(x.view()))
            .is_err());
    }

    fn arch_zero(arch: &Arch) -> ParamSet {
        match arch {
            Arch::Mlp(s) => s.zeros(),
            Arch::Lstm(s) => s.zeros(),
        }
    }
}
