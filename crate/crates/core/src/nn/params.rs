use std::collections::BTreeMap;

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A dense real tensor stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "tensor of shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn view1(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.data[..])
    }

    /// Matrix view; panics if the tensor is not 2-D (shapes are validated on construction).
    pub fn view2(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.shape[0], self.shape[1]), &self.data).expect("2-D tensor")
    }

    pub fn view2_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        ArrayViewMut2::from_shape((self.shape[0], self.shape[1]), &mut self.data)
            .expect("2-D tensor")
    }
}

/// Named parameter tensors of one approximator, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub tensors: BTreeMap<String, Tensor>,
    /// Optimizer steps applied to these parameters.
    #[serde(default)]
    pub step_count: u64,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Shape(format!("missing parameter tensor `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::Shape(format!("missing parameter tensor `{name}`")))
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeros_like(&self) -> Self {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .map(|(k, t)| (k.clone(), Tensor::zeros(&t.shape)))
                .collect(),
            step_count: 0,
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for t in self.tensors.values() {
            out.extend_from_slice(&t.data);
        }
        out
    }

    /// Rebuilds a set shaped like `template` from a flat vector in name order.
    pub fn unflatten(flat: &[f64], template: &ParamSet) -> Result<Self> {
        if flat.len() != template.len() {
            return Err(Error::Shape(format!(
                "flat vector has {} values, template needs {}",
                flat.len(),
                template.len()
            )));
        }
        let mut offset = 0;
        let mut tensors = BTreeMap::new();
        for (name, t) in &template.tensors {
            let data = flat[offset..offset + t.len()].to_vec();
            offset += t.len();
            tensors.insert(
                name.clone(),
                Tensor {
                    shape: t.shape.clone(),
                    data,
                },
            );
        }
        Ok(ParamSet {
            tensors,
            step_count: template.step_count,
        })
    }

    /// Overwrites the values from a flat vector, keeping shapes and step count.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        let next = Self::unflatten(flat, self)?;
        self.tensors = next.tensors;
        Ok(())
    }

    /// Checks that both sets have identical names and shapes.
    pub fn check_compatible(&self, other: &ParamSet) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::Shape(format!(
                "parameter sets have {} and {} tensors",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for ((ka, ta), (kb, tb)) in self.tensors.iter().zip(&other.tensors) {
            if ka != kb || ta.shape != tb.shape {
                return Err(Error::Shape(format!(
                    "tensor `{ka}` {:?} does not match `{kb}` {:?}",
                    ta.shape, tb.shape
                )));
            }
        }
        Ok(())
    }

    /// `self += scale * other`, elementwise.
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.tensors.values_mut().zip(other.tensors.values()) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors.values_mut() {
            t.data.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors
            .values()
            .flat_map(|t| t.data.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Convex blend `zeta * a + (1 - zeta) * b` of two equally long vectors.
pub fn blend(a: &[f64], b: &[f64], zeta: f64) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cannot blend vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| zeta * x + (1.0 - zeta) * y)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_set(values: &[f64]) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert(
            "b.bias",
            Tensor::from_vec(&[2], values[0..2].to_vec()).unwrap(),
        );
        p.insert(
            "a.weight",
            Tensor::from_vec(&[2, 3], values[2..8].to_vec()).unwrap(),
        );
        p
    }

    #[test]
    fn flatten_orders_by_name() {
        let p = sample_set(&[1., 2., 3., 4., 5., 6., 7., 8.]);
        assert_eq!(p.len(), 8);
        assert_eq!(p.flatten(), vec![3., 4., 5., 6., 7., 8., 1., 2.]);
    }

    #[test]
    fn length_mismatch() {
        let p = sample_set(&[0.0; 8]);
        assert!(matches!(
            ParamSet::unflatten(&[0.0; 7], &p),
            Err(Error::Shape(_))
        ));
        assert!(blend(&[1.0], &[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn blending_commutes_with_flattening() {
        let a = sample_set(&[1., 2., 3., 4., 5., 6., 7., 8.]);
        let b = sample_set(&[3., 0., -1., 4., 9., 2., 1., 0.]);
        let mixed =
            ParamSet::unflatten(&blend(&a.flatten(), &b.flatten(), 0.5).unwrap(), &a).unwrap();
        for (name, t) in &mixed.tensors {
            let ta = a.get(name).unwrap();
            let tb = b.get(name).unwrap();
            for i in 0..t.len() {
                assert_eq!(t.data[i], 0.5 * ta.data[i] + 0.5 * tb.data[i]);
            }
        }
    }

    proptest! {
        #[test]
        fn flatten_roundtrip(values in proptest::collection::vec(-1e6f64..1e6, 8)) {
            let p = sample_set(&values);
            let flat = p.flatten();
            let q = ParamSet::unflatten(&flat, &p).unwrap();
            prop_assert_eq!(&q, &p);
            prop_assert_eq!(q.flatten(), flat);
        }
    }
}
