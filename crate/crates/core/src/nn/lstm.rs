use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ParamSet, Tensor};
use crate::{Error, Result};

pub(crate) const W_X: &str = "lstm.w_x";
pub(crate) const W_H: &str = "lstm.w_h";
pub(crate) const BIAS: &str = "lstm.b";
pub(crate) const HEAD_W: &str = "head.w";
pub(crate) const HEAD_B: &str = "head.b";

/// Single-layer LSTM followed by a linear head on the last hidden state.
///
/// Gate blocks inside the `4 * hidden` pre-activation are ordered input,
/// forget, candidate, output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

/// Hidden and cell state, one row per batch item.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Array2<f64>,
    pub c: Array2<f64>,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        LstmState {
            h: Array2::zeros((batch, hidden)),
            c: Array2::zeros((batch, hidden)),
        }
    }
}

struct StepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    c: Array2<f64>,
}

pub struct LstmCache {
    steps: Vec<StepCache>,
    pub output: Array2<f64>,
    pub state: LstmState,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden == 0 || self.output == 0 {
            return Err(Error::Config(format!(
                "lstm widths must be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Uniform `±1/sqrt(hidden)` initialisation with the forget-gate bias set to 1.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamSet {
        let (i, h, o) = (self.input, self.hidden, self.output);
        let bound = 1.0 / (h as f64).sqrt();
        let mut draw =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound)).collect() };
        let mut p = ParamSet::new();
        p.insert(
            W_X,
            Tensor::from_vec(&[i, 4 * h], draw(i * 4 * h)).expect("sized"),
        );
        p.insert(
            W_H,
            Tensor::from_vec(&[h, 4 * h], draw(h * 4 * h)).expect("sized"),
        );
        let mut b = draw(4 * h);
        b[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
        p.insert(BIAS, Tensor::from_vec(&[4 * h], b).expect("sized"));
        p.insert(
            HEAD_W,
            Tensor::from_vec(&[h, o], draw(h * o)).expect("sized"),
        );
        p.insert(HEAD_B, Tensor::from_vec(&[o], draw(o)).expect("sized"));
        p
    }

    pub fn zeros(&self) -> ParamSet {
        let (i, h, o) = (self.input, self.hidden, self.output);
        let mut p = ParamSet::new();
        p.insert(W_X, Tensor::zeros(&[i, 4 * h]));
        p.insert(W_H, Tensor::zeros(&[h, 4 * h]));
        p.insert(BIAS, Tensor::zeros(&[4 * h]));
        p.insert(HEAD_W, Tensor::zeros(&[h, o]));
        p.insert(HEAD_B, Tensor::zeros(&[o]));
        p
    }

    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        self.zeros().check_compatible(params)
    }

    /// Runs the recurrence over `sequence[0..L]` (each `batch x input`) and applies the head.
    pub fn forward(
        &self,
        params: &ParamSet,
        sequence: &[ArrayView2<'_, f64>],
        initial: Option<&LstmState>,
    ) -> Result<(Array2<f64>, LstmState)> {
        let cache = self.forward_cached(params, sequence, initial)?;
        Ok((cache.output, cache.state))
    }

    pub fn forward_cached(
        &self,
        params: &ParamSet,
        sequence: &[ArrayView2<'_, f64>],
        initial: Option<&LstmState>,
    ) -> Result<LstmCache> {
        let Some(first) = sequence.first() else {
            return Err(Error::Shape("lstm needs a nonempty sequence".into()));
        };
        let batch = first.nrows();
        if sequence
            .iter()
            .any(|x| x.ncols() != self.input || x.nrows() != batch)
        {
            return Err(Error::Shape(format!(
                "lstm expects every step to be {batch} x {}",
                self.input
            )));
        }
        self.check_params(params)?;
        let hd = self.hidden;
        let wx = params.get(W_X)?.view2();
        let wh = params.get(W_H)?.view2();
        let b = params.get(BIAS)?.view1();
        let mut state = match initial {
            Some(s) if s.h.dim() == (batch, hd) && s.c.dim() == (batch, hd) => s.clone(),
            Some(_) => {
                return Err(Error::Shape(
                    "initial lstm state has the wrong shape".into(),
                ))
            }
            None => LstmState::zeros(batch, hd),
        };
        let mut steps = Vec::with_capacity(sequence.len());
        for x in sequence {
            let mut z = x.dot(&wx) + state.h.dot(&wh);
            z += &b;
            let i = z.slice(s![.., 0..hd]).mapv(sigmoid);
            let f = z.slice(s![.., hd..2 * hd]).mapv(sigmoid);
            let g = z.slice(s![.., 2 * hd..3 * hd]).mapv(f64::tanh);
            let o = z.slice(s![.., 3 * hd..4 * hd]).mapv(sigmoid);
            let c = &f * &state.c + &i * &g;
            let h = &o * &c.mapv(f64::tanh);
            steps.push(StepCache {
                x: x.to_owned(),
                h_prev: std::mem::replace(&mut state.h, h),
                c_prev: std::mem::replace(&mut state.c, c.clone()),
                i,
                f,
                g,
                o,
                c,
            });
        }
        let mut output = state.h.dot(&params.get(HEAD_W)?.view2());
        output += &params.get(HEAD_B)?.view1();
        Ok(LstmCache {
            steps,
            output,
            state,
        })
    }

    /// Backpropagation through time for `d_out = dL/d(output)`.
    pub fn backward(
        &self,
        params: &ParamSet,
        cache: &LstmCache,
        d_out: &Array2<f64>,
    ) -> Result<ParamSet> {
        if d_out.dim() != cache.output.dim() {
            return Err(Error::Shape(
                "output gradient does not match forward output".into(),
            ));
        }
        let hd = self.hidden;
        let wh = params.get(W_H)?.view2();
        let head_w = params.get(HEAD_W)?.view2();
        let batch = d_out.nrows();

        let d_head_w = cache.state.h.t().dot(d_out);
        let d_head_b: Array1<f64> = d_out.sum_axis(Axis(0));
        let mut dh = d_out.dot(&head_w.t());
        let mut dc = Array2::<f64>::zeros((batch, hd));
        let mut d_wx = Array2::<f64>::zeros((self.input, 4 * hd));
        let mut d_wh = Array2::<f64>::zeros((hd, 4 * hd));
        let mut d_b = Array1::<f64>::zeros(4 * hd);
        let mut dz = Array2::<f64>::zeros((batch, 4 * hd));

        for st in cache.steps.iter().rev() {
            let tanh_c = st.c.mapv(f64::tanh);
            Zip::from(&mut dc)
                .and(&dh)
                .and(&st.o)
                .and(&tanh_c)
                .for_each(|dc, &dh, &o, &tc| *dc += dh * o * (1.0 - tc * tc));
            {
                let (mut dzi, rest) = dz.view_mut().split_at(Axis(1), hd);
                let (mut dzf, rest) = rest.split_at(Axis(1), hd);
                let (mut dzg, mut dzo) = rest.split_at(Axis(1), hd);
                Zip::from(&mut dzi)
                    .and(&dc)
                    .and(&st.g)
                    .and(&st.i)
                    .for_each(|d, &dc, &g, &i| *d = dc * g * i * (1.0 - i));
                Zip::from(&mut dzf)
                    .and(&dc)
                    .and(&st.c_prev)
                    .and(&st.f)
                    .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (1.0 - f));
                Zip::from(&mut dzg)
                    .and(&dc)
                    .and(&st.i)
                    .and(&st.g)
                    .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
                Zip::from(&mut dzo)
                    .and(&dh)
                    .and(&tanh_c)
                    .and(&st.o)
                    .for_each(|d, &dh, &tc, &o| *d = dh * tc * o * (1.0 - o));
            }
            d_wx += &st.x.t().dot(&dz);
            d_wh += &st.h_prev.t().dot(&dz);
            d_b += &dz.sum_axis(Axis(0));
            dh = dz.dot(&wh.t());
            dc *= &st.f;
        }

        let mut grads = ParamSet::new();
        let t2 = |a: Array2<f64>| {
            let shape = [a.nrows(), a.ncols()];
            Tensor::from_vec(&shape, a.into_raw_vec_and_offset().0)
        };
        grads.insert(W_X, t2(d_wx)?);
        grads.insert(W_H, t2(d_wh)?);
        grads.insert(BIAS, Tensor::from_vec(&[4 * hd], d_b.to_vec())?);
        grads.insert(HEAD_W, t2(d_head_w)?);
        grads.insert(HEAD_B, Tensor::from_vec(&[self.output], d_head_b.to_vec())?);
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spec(input: usize, hidden: usize, output: usize) -> LstmSpec {
        LstmSpec {
            input,
            hidden,
            output,
        }
    }

    #[test]
    fn zero_params_output_head_bias() {
        let sp = spec(2, 3, 2);
        let mut p = sp.zeros();
        p.get_mut(HEAD_B).unwrap().data = vec![0.7, -0.2];
        let x = array![[1.0, 2.0]];
        let (y, st) = sp
            .forward(&p, &[x.view(), x.view(), x.view()], None)
            .unwrap();
        assert_eq!(y, array![[0.7, -0.2]]);
        assert!(st.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_one_is_single_cell() {
        let sp = spec(1, 1, 1);
        let mut p = sp.zeros();
        p.get_mut(W_X).unwrap().data = vec![0.5, -0.3, 0.8, 1.2];
        p.get_mut(BIAS).unwrap().data = vec![0.1, 0.2, -0.1, 0.0];
        p.get_mut(HEAD_W).unwrap().data = vec![1.0];
        let x = 2.0;
        let i = sigmoid(0.5 * x + 0.1);
        let g = (0.8 * x - 0.1f64).tanh();
        let o = sigmoid(1.2 * x);
        let h = o * (i * g).tanh();
        let (y, _) = sp.forward(&p, &[array![[x]].view()], None).unwrap();
        assert!((y[[0, 0]] - h).abs() < 1e-15);
    }

    #[test]
    fn two_step_hand_recurrence() {
        let sp = spec(1, 1, 1);
        let mut p = sp.zeros();
        let (wxi, wxf, wxg, wxo) = (0.4, -0.6, 0.9, 0.3);
        let (whi, whf, whg, who) = (0.2, 0.5, -0.7, 0.8);
        let (bi, bf, bg, bo) = (0.0, 1.0, 0.1, -0.2);
        p.get_mut(W_X).unwrap().data = vec![wxi, wxf, wxg, wxo];
        p.get_mut(W_H).unwrap().data = vec![whi, whf, whg, who];
        p.get_mut(BIAS).unwrap().data = vec![bi, bf, bg, bo];
        p.get_mut(HEAD_W).unwrap().data = vec![2.0];
        p.get_mut(HEAD_B).unwrap().data = vec![0.5];
        let xs = [1.5, -0.5];
        let (mut h, mut c) = (0.0f64, 0.0f64);
        for x in xs {
            let i = sigmoid(wxi * x + whi * h + bi);
            let f = sigmoid(wxf * x + whf * h + bf);
            let g = (wxg * x + whg * h + bg).tanh();
            let o = sigmoid(wxo * x + who * h + bo);
            c = f * c + i * g;
            h = o * c.tanh();
        }
        let seq = [array![[xs[0]]], array![[xs[1]]]];
        let views: Vec<_> = seq.iter().map(|a| a.view()).collect();
        let (y, st) = sp.forward(&p, &views, None).unwrap();
        assert!((y[[0, 0]] - (2.0 * h + 0.5)).abs() < 1e-15);
        assert!((st.c[[0, 0]] - c).abs() < 1e-15);
    }

    #[test]
    fn forget_bias_starts_at_one() {
        use rand::SeedableRng;
        let sp = spec(3, 4, 2);
        let p = sp.init(&mut rand_chacha::ChaCha8Rng::seed_from_u64(0));
        assert!(p.get(BIAS).unwrap().data[4..8].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let sp = spec(2, 2, 1);
        let p = sp.zeros();
        assert!(matches!(sp.forward(&p, &[], None), Err(Error::Shape(_))));
        let bad = array![[1.0, 2.0, 3.0]];
        assert!(sp.forward(&p, &[bad.view()], None).is_err());
    }
}
