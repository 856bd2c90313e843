use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TwinConfig, TwinDataset};
use crate::nn::{AdamState, Loss, LstmSpec, MlpSpec, ParamSet};
use crate::{Error, Result};

/// Mean training losses per epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub state_loss: Vec<f64>,
    pub reward_loss: Vec<f64>,
}

/// Deterministic point-prediction twin over `[state, allocation fractions]` inputs.
#[derive(Clone, Debug)]
pub struct TwinModel {
    cfg: TwinConfig,
    lstm_spec: LstmSpec,
    reward_spec: MlpSpec,
    lstm: ParamSet,
    reward: ParamSet,
    adam_p: AdamState,
    adam_r: AdamState,
    rng: ChaCha8Rng,
    calibrated: bool,
}

impl TwinModel {
    pub fn new(cfg: TwinConfig, state_dim: usize, slices: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let input = state_dim + slices;
        let lstm_spec = LstmSpec {
            input,
            hidden: cfg.hidden,
            output: state_dim,
        };
        lstm_spec.validate()?;
        let mut widths = vec![input];
        widths.extend(&cfg.reward_hidden);
        widths.push(1);
        let reward_spec = MlpSpec::new(widths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lstm = lstm_spec.init(&mut rng);
        let reward = reward_spec.init(&mut rng);
        Ok(TwinModel {
            adam_p: AdamState::new(&lstm, cfg.learning_rate),
            adam_r: AdamState::new(&reward, cfg.learning_rate),
            cfg,
            lstm_spec,
            reward_spec,
            lstm,
            reward,
            rng,
            calibrated: false,
        })
    }

    pub fn config(&self) -> &TwinConfig {
        &self.cfg
    }

    pub fn lstm_spec(&self) -> &LstmSpec {
        &self.lstm_spec
    }

    pub fn reward_spec(&self) -> &MlpSpec {
        &self.reward_spec
    }

    pub fn lstm_params(&self) -> &ParamSet {
        &self.lstm
    }

    pub fn reward_params(&self) -> &ParamSet {
        &self.reward
    }

    pub fn state_dim(&self) -> usize {
        self.lstm_spec.output
    }

    pub fn input_width(&self) -> usize {
        self.lstm_spec.input
    }

    pub fn set_params(&mut self, lstm: ParamSet, reward: ParamSet) -> Result<()> {
        self.lstm_spec.check_params(&lstm)?;
        self.reward_spec.check_params(&reward)?;
        self.lstm = lstm;
        self.reward = reward;
        Ok(())
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    pub fn set_calibrated(&mut self, calibrated: bool) {
        self.calibrated = calibrated;
    }

    /// `window` time-major matrices for the given items, zero-padded at the front.
    fn sequences(&self, data: &TwinDataset, items: &[usize]) -> Vec<Array2<f64>> {
        let l = self.cfg.window;
        let w = self.input_width();
        let mut seq = vec![Array2::zeros((items.len(), w)); l];
        for (b, &i) in items.iter().enumerate() {
            let ctx = data.context(i, l);
            let offset = l - ctx.len();
            for (k, x) in ctx.iter().enumerate() {
                seq[offset + k]
                    .row_mut(b)
                    .assign(&ndarray::ArrayView1::from(x.as_slice()));
            }
        }
        seq
    }

    fn current_inputs(&self, data: &TwinDataset, items: &[usize]) -> Array2<f64> {
        let w = self.input_width();
        let mut x = Array2::zeros((items.len(), w));
        for (b, &i) in items.iter().enumerate() {
            x.row_mut(b).assign(&ndarray::Array1::from(data.input(i)));
        }
        x
    }

    fn targets(data: &TwinDataset, items: &[usize], dim: usize) -> (Array2<f64>, Array2<f64>) {
        let mut s = Array2::zeros((items.len(), dim));
        let mut r = Array2::zeros((items.len(), 1));
        for (b, &i) in items.iter().enumerate() {
            let st = &data.steps()[i];
            s.row_mut(b)
                .assign(&ndarray::ArrayView1::from(st.s_next.as_slice()));
            r[[b, 0]] = st.r;
        }
        (s, r)
    }

    fn check_data(&self, data: &TwinDataset, items: &[usize]) -> Result<()> {
        if data.is_empty() || items.is_empty() {
            return Err(Error::State(
                "twin needs a nonempty set of transitions".into(),
            ));
        }
        if data.state_dim() != Some(self.state_dim()) || data.input(0).len() != self.input_width() {
            return Err(Error::Shape("dataset widths do not match the twin".into()));
        }
        if let Some(&bad) = items.iter().find(|&&i| i >= data.len()) {
            return Err(Error::Range {
                index: bad,
                count: data.len(),
            });
        }
        Ok(())
    }

    /// Minibatch regression of both predictors on `items`, warm-started from the
    /// current parameters and optimizer moments.
    pub fn fit(&mut self, data: &TwinDataset, items: &[usize]) -> Result<FitReport> {
        self.check_data(data, items)?;
        let mut report = FitReport::default();
        let mut order = items.to_vec();
        for _ in 0..self.cfg.epochs {
            order.shuffle(&mut self.rng);
            let (mut lp, mut lr, mut n) = (0.0, 0.0, 0usize);
            for chunk in order.chunks(self.cfg.batch_size) {
                let seq = self.sequences(data, chunk);
                let views: Vec<_> = seq.iter().map(|a| a.view()).collect();
                let (s_t, r_t) = Self::targets(data, chunk, self.state_dim());

                let cache = self.lstm_spec.forward_cached(&self.lstm, &views, None)?;
                let (loss_p, d_out) = Loss::Mse {
                    targets: s_t.view(),
                }
                .evaluate(&cache.output)?;
                let g = self.lstm_spec.backward(&self.lstm, &cache, &d_out)?;
                self.adam_p.update(&mut self.lstm, &g)?;

                let x = self.current_inputs(data, chunk);
                let cache = self.reward_spec.forward_cached(&self.reward, x.view())?;
                let (loss_r, d_out) = Loss::Mse {
                    targets: r_t.view(),
                }
                .evaluate(&cache.output)?;
                let g = self.reward_spec.backward(&self.reward, &cache, &d_out)?;
                self.adam_r.update(&mut self.reward, &g)?;

                lp += loss_p * chunk.len() as f64;
                lr += loss_r * chunk.len() as f64;
                n += chunk.len();
            }
            report.state_loss.push(lp / n as f64);
            report.reward_loss.push(lr / n as f64);
        }
        if self.cfg.epochs > 0 {
            self.calibrated = true;
        }
        Ok(report)
    }

    /// Prediction from a context of inputs (oldest first, the last one being the
    /// current state and allocation). The next state is clamped to `[0, 1]`.
    pub fn predict(&self, context: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
        if context.is_empty() || context.len() > self.cfg.window {
            return Err(Error::Validation(format!(
                "context length must lie in 1..={}, got {}",
                self.cfg.window,
                context.len()
            )));
        }
        let w = self.input_width();
        if context.iter().any(|x| x.len() != w) {
            return Err(Error::Shape(format!("twin inputs must have width {w}")));
        }
        let l = self.cfg.window;
        let mut seq = vec![Array2::zeros((1, w)); l];
        for (k, x) in context.iter().enumerate() {
            seq[l - context.len() + k]
                .row_mut(0)
                .assign(&ndarray::ArrayView1::from(x.as_slice()));
        }
        let views: Vec<_> = seq.iter().map(|a| a.view()).collect();
        let (s, _) = self.lstm_spec.forward(&self.lstm, &views, None)?;
        let last = context.last().expect("nonempty");
        let x = Array2::from_shape_vec((1, w), last.clone())
            .map_err(|e| Error::Shape(e.to_string()))?;
        let r = self.reward_spec.forward(&self.reward, x.view())?[[0, 0]];
        Ok((s.row(0).iter().map(|v| v.clamp(0.0, 1.0)).collect(), r))
    }

    /// Clamped next-state predictions and reward predictions for dataset items.
    pub fn predict_items(
        &self,
        data: &TwinDataset,
        items: &[usize],
    ) -> Result<(Array2<f64>, Vec<f64>)> {
        self.check_data(data, items)?;
        let seq = self.sequences(data, items);
        let views: Vec<_> = seq.iter().map(|a| a.view()).collect();
        let (mut s, _) = self.lstm_spec.forward(&self.lstm, &views, None)?;
        s.mapv_inplace(|v| v.clamp(0.0, 1.0));
        let x = self.current_inputs(data, items);
        let r = self.reward_spec.forward(&self.reward, x.view())?;
        Ok((s, r.column(0).to_vec()))
    }

    /// Held-out `(L_p, L_R)`: mean squared next-state error (summed over
    /// components) and mean squared reward error.
    pub fn evaluate(&self, data: &TwinDataset, items: &[usize]) -> Result<(f64, f64)> {
        let (s, r) = self.predict_items(data, items)?;
        let (s_t, r_t) = Self::targets(data, items, self.state_dim());
        let n = items.len() as f64;
        let lp = (&s - &s_t).mapv(|d| d * d).sum() / n;
        let lr = r
            .iter()
            .zip(r_t.column(0))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        Ok((lp, lr))
    }
}
