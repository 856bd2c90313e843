use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::{Error, Result};

/// The supported loss families over a network output batch.
#[derive(Clone, Debug)]
pub enum Loss<'a> {
    /// `mean_i ||y_i - t_i||^2`.
    Mse { targets: ArrayView2<'a, f64> },
    /// `mean_i -log softmax(y_i)[label_i]`.
    CrossEntropy { labels: &'a [usize] },
    /// `mean_i (y_i[a_i] - target_i)^2` with targets held fixed.
    Td {
        actions: &'a [usize],
        targets: &'a [f64],
    },
    /// `factor * inner`.
    Scaled { factor: f64, inner: Box<Loss<'a>> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    CrossEntropy,
    Td,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "cross_entropy" | "ce" => Ok(LossKind::CrossEntropy),
            "td" => Ok(LossKind::Td),
            other => Err(Error::Config(format!("unsupported loss `{other}`"))),
        }
    }
}

/// Row-wise softmax, shifted by the row max.
pub fn softmax(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let z = row.sum();
        row.mapv_inplace(|v| v / z);
    }
    out
}

impl Loss<'_> {
    pub fn kind(&self) -> LossKind {
        match self {
            Loss::Mse { .. } => LossKind::Mse,
            Loss::CrossEntropy { .. } => LossKind::CrossEntropy,
            Loss::Td { .. } => LossKind::Td,
            Loss::Scaled { inner, .. } => inner.kind(),
        }
    }

    /// Loss value and `dL/d(output)`.
    pub fn evaluate(&self, output: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
        let (b, w) = output.dim();
        if b == 0 {
            return Err(Error::Shape("loss over an empty batch".into()));
        }
        let inv = 1.0 / b as f64;
        match self {
            Loss::Mse { targets } => {
                if targets.dim() != (b, w) {
                    return Err(Error::Shape(format!(
                        "mse targets are {:?}, output is {:?}",
                        targets.dim(),
                        (b, w)
                    )));
                }
                let diff = output - targets;
                let value = diff.iter().map(|d| d * d).sum::<f64>() * inv;
                Ok((value, diff * (2.0 * inv)))
            }
            Loss::CrossEntropy { labels } => {
                if labels.len() != b || labels.iter().any(|&l| l >= w) {
                    return Err(Error::Shape(
                        "cross-entropy labels do not match the output".into(),
                    ));
                }
                let mut grad = softmax(output.view());
                let mut value = 0.0;
                for (i, &l) in labels.iter().enumerate() {
                    value -= grad[[i, l]].ln();
                    grad[[i, l]] -= 1.0;
                }
                grad *= inv;
                Ok((value * inv, grad))
            }
            Loss::Td { actions, targets } => {
                if actions.len() != b || targets.len() != b || actions.iter().any(|&a| a >= w) {
                    return Err(Error::Shape("td batch does not match the output".into()));
                }
                let mut grad = Array2::zeros((b, w));
                let mut value = 0.0;
                for i in 0..b {
                    let d = output[[i, actions[i]]] - targets[i];
                    value += d * d;
                    grad[[i, actions[i]]] = 2.0 * d * inv;
                }
                Ok((value * inv, grad))
            }
            Loss::Scaled { factor, inner } => {
                let (v, g) = inner.evaluate(output)?;
                Ok((factor * v, g * *factor))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cross_entropy_hand_values() {
        // a dominant logit gives p(label) = 1 to machine precision
        let out = array![[800.0, 0.0, 0.0]];
        let (v, _) = Loss::CrossEntropy { labels: &[0] }.evaluate(&out).unwrap();
        assert_eq!(v, 0.0);
        // logits (0, ln(e - 1)) -> p0 = 1 / e
        let out = array![[0.0, (std::f64::consts::E - 1.0).ln()]];
        let (v, _) = Loss::CrossEntropy { labels: &[0] }.evaluate(&out).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn td_only_touches_taken_actions() {
        let out = array![[1.0, 2.0], [3.0, 4.0]];
        let (v, g) = Loss::Td {
            actions: &[1, 0],
            targets: &[2.0, 1.0],
        }
        .evaluate(&out)
        .unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(g, array![[0.0, 0.0], [2.0, 0.0]]);
    }

    #[test]
    fn unsupported_tag() {
        assert!(matches!("hinge".parse::<LossKind>(), Err(Error::Config(_))));
        assert_eq!("td".parse::<LossKind>().unwrap(), LossKind::Td);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax(array![[1.0, 2.0, 3.0], [-5.0, 0.0, 5.0]].view());
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-15);
        }
    }
}
