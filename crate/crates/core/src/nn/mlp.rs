use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ParamSet, Tensor};
use crate::par::{self, Exec};
use crate::{Error, Result};

/// Fully connected network: rectified hidden layers, linear output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Layer widths from input to output, at least two entries.
    pub widths: Vec<usize>,
}

pub(crate) fn weight_name(layer: usize) -> String {
    format!("layer{layer:02}.w")
}

pub(crate) fn bias_name(layer: usize) -> String {
    format!("layer{layer:02}.b")
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// Input of every layer (`inputs[0]` is the batch itself).
    inputs: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        let spec = MlpSpec { widths };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::Config(format!(
                "mlp needs at least input and output widths, all >= 1, got {:?}",
                self.widths
            )));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Fan-in scaled uniform initialisation `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamSet {
        let mut p = ParamSet::new();
        for l in 0..self.layers() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            let w = Tensor::from_vec(&[fan_in, fan_out], draw(fan_in * fan_out)).expect("sized");
            let b = Tensor::from_vec(&[fan_out], draw(fan_out)).expect("sized");
            p.insert(weight_name(l), w);
            p.insert(bias_name(l), b);
        }
        p
    }

    pub fn zeros(&self) -> ParamSet {
        let mut p = ParamSet::new();
        for l in 0..self.layers() {
            p.insert(
                weight_name(l),
                Tensor::zeros(&[self.widths[l], self.widths[l + 1]]),
            );
            p.insert(bias_name(l), Tensor::zeros(&[self.widths[l + 1]]));
        }
        p
    }

    /// Verifies that `params` holds exactly this architecture's tensors.
    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        self.zeros().check_compatible(params)
    }

    pub fn forward(&self, params: &ParamSet, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(params, x)?.output)
    }

    /// Forward pass over a large batch, split into row blocks under `exec`.
    /// Rows are independent, so the result does not depend on the mode.
    pub fn forward_exec(
        &self,
        params: &ParamSet,
        x: ArrayView2<'_, f64>,
        exec: Exec,
    ) -> Result<Array2<f64>> {
        const BLOCK: usize = 256;
        if exec.effective() == Exec::Sequential || x.nrows() <= BLOCK {
            return self.forward(params, x);
        }
        let starts: Vec<usize> = (0..x.nrows()).step_by(BLOCK).collect();
        let blocks = par::map(exec, &starts, |&s| {
            let e = (s + BLOCK).min(x.nrows());
            self.forward(params, x.slice(s![s..e, ..]))
        });
        let mut out = Array2::zeros((x.nrows(), self.output_width()));
        for (&s, block) in starts.iter().zip(blocks) {
            let block = block?;
            out.slice_mut(s![s..s + block.nrows(), ..]).assign(&block);
        }
        Ok(out)
    }

    pub fn forward_cached(&self, params: &ParamSet, x: ArrayView2<'_, f64>) -> Result<MlpCache> {
        if x.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "mlp expects input width {}, got {}",
                self.input_width(),
                x.ncols()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers());
        let mut h = x.to_owned();
        for l in 0..self.layers() {
            let w = params.get(&weight_name(l))?;
            let b = params.get(&bias_name(l))?;
            if w.shape != [self.widths[l], self.widths[l + 1]] || b.shape != [self.widths[l + 1]] {
                return Err(Error::Shape(format!(
                    "layer {l} parameters do not match {:?}",
                    self.widths
                )));
            }
            let mut z = h.dot(&w.view2());
            z += &b.view1();
            if l + 1 < self.layers() {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(h);
            h = z;
        }
        Ok(MlpCache { inputs, output: h })
    }

    /// Gradients of a scalar loss given `d_out = dL/d(output)` for the cached batch.
    pub fn backward(
        &self,
        params: &ParamSet,
        cache: &MlpCache,
        d_out: &Array2<f64>,
    ) -> Result<ParamSet> {
        if d_out.dim() != cache.output.dim() {
            return Err(Error::Shape(
                "output gradient does not match forward output".into(),
            ));
        }
        let mut grads = ParamSet::new();
        let mut delta = d_out.clone();
        for l in (0..self.layers()).rev() {
            let input = &cache.inputs[l];
            let dw = input.t().dot(&delta);
            let db: Array1<f64> = delta.sum_axis(Axis(0));
            if l > 0 {
                let w = params.get(&weight_name(l))?;
                let mut back = delta.dot(&w.view2().t());
                // input of layer l is the rectified output of layer l - 1
                ndarray::Zip::from(&mut back).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
            grads.insert(
                weight_name(l),
                Tensor::from_vec(&[dw.nrows(), dw.ncols()], dw.into_raw_vec_and_offset().0)?,
            );
            grads.insert(bias_name(l), Tensor::from_vec(&[db.len()], db.to_vec())?);
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn zero_params_zero_output() {
        let spec = MlpSpec::new(vec![3, 5, 2]).unwrap();
        let out = spec
            .forward(
                &spec.zeros(),
                array![[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]].view(),
            )
            .unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer() {
        let spec = MlpSpec::new(vec![3, 3]).unwrap();
        let mut p = spec.zeros();
        let w = p.get_mut("layer00.w").unwrap();
        for i in 0..3 {
            w.data[i * 3 + i] = 1.0;
        }
        let x = array![[1.0, -2.0, 3.5]];
        assert_eq!(spec.forward(&p, x.view()).unwrap(), x);
    }

    #[test]
    fn hand_computed_two_two_one() {
        // h = relu(x W0 + b0), y = h W1 + b1
        let spec = MlpSpec::new(vec![2, 2, 1]).unwrap();
        let mut p = spec.zeros();
        p.get_mut("layer00.w").unwrap().data = vec![1.0, -1.0, 2.0, 0.5];
        p.get_mut("layer00.b").unwrap().data = vec![0.5, -3.0];
        p.get_mut("layer01.w").unwrap().data = vec![2.0, -1.0];
        p.get_mut("layer01.b").unwrap().data = vec![0.25];
        // x = (1, 2): z0 = (1 + 4 + 0.5, -1 + 1 - 3) = (5.5, -3) -> h = (5.5, 0)
        // y = 11 + 0 + 0.25
        let y = spec.forward(&p, array![[1.0, 2.0]].view()).unwrap();
        assert_eq!(y[[0, 0]], 11.25);
    }

    #[test]
    fn shape_errors() {
        let spec = MlpSpec::new(vec![3, 2]).unwrap();
        assert!(matches!(
            spec.forward(&spec.zeros(), array![[1.0, 2.0]].view()),
            Err(Error::Shape(_))
        ));
        assert!(MlpSpec::new(vec![3]).is_err());
        assert!(MlpSpec::new(vec![3, 0, 2]).is_err());
    }

    #[test]
    fn blocked_forward_matches() {
        let spec = MlpSpec::new(vec![4, 16, 16, 7]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let p = spec.init(&mut rng);
        let x = Array2::from_shape_fn((1000, 4), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0);
        let a = spec.forward_exec(&p, x.view(), Exec::Sequential).unwrap();
        let b = spec.forward_exec(&p, x.view(), Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(spec.forward(&p, x.view()).unwrap(), a);
    }
}
