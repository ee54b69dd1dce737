//! Hand-derived gradients, online gradient descent and a finite-difference
//! gradient certifier.
//!
//! Two sign conventions meet here. The MLP update follows the classic
//! ascent form `W += λ·E·O` where `E` already carries `(T − O)`. The
//! recurrent models compute `∂/∂w ½(T − y)²` and step `w -= λ·grad`. Both are
//! the same descent step; `tests/backprop_oracle.rs` checks it.

mod backprop;
mod bptt;
mod dropout;
mod gradcheck;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FxError, Result};
use crate::models::{init_params, Model, ModelParams, ModelSpec};
use crate::numkit::Vector;
use crate::pipeline::WindowedDataset;

pub use backprop::mlp_backprop_step;
pub use dropout::{apply_dropout, dropout_mask, DropoutMasks, Phase};
pub use gradcheck::{gradient_check, gradient_check_model};

/// Upper end of the learning-rate interval accepted without an explicit override.
pub const LEARNING_RATE_CEILING: f64 = 0.1;

/// Element-wise gradient bound when clipping is enabled.
pub const CLIP_VALUE: f64 = 5.0;

/// Divergence threshold, relative to the untrained model's training MSE.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Steps unrolled by BPTT; `None` means the whole window.
    pub bptt_horizon: Option<usize>,
    pub shuffle_each_epoch: bool,
    /// Clip every gradient entry to ±[`CLIP_VALUE`].
    pub clip_gradients: bool,
    pub allow_lr_outside_paper: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 50,
            dropout_rate: 0.1,
            seed: 0,
            bptt_horizon: None,
            shuffle_each_epoch: true,
            clip_gradients: false,
            allow_lr_outside_paper: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(FxError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.learning_rate > LEARNING_RATE_CEILING && !self.allow_lr_outside_paper {
            return Err(FxError::Config(format!(
                "learning rate {} is outside (0, {LEARNING_RATE_CEILING}]; pass --allow-lr-outside-paper to use it",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(FxError::Config(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.bptt_horizon == Some(0) {
            return Err(FxError::Config("bptt_horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean squared error on scaled values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub train_mse: Vec<f64>,
    pub val_mse: Option<Vec<f64>>,
}

impl LossHistory {
    pub fn epochs(&self) -> usize {
        self.train_mse.len()
    }

    /// `epoch,train_mse,val_mse`; epochs count from 1, `val_mse` is empty
    /// when no validation set was given.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,train_mse,val_mse")?;
        for (e, t) in self.train_mse.iter().enumerate() {
            let v = self
                .val_mse
                .as_ref()
                .and_then(|v| v.get(e))
                .map(|v| v.to_string())
                .unwrap_or_default();
            writeln!(out, "{},{},{}", e + 1, t, v)?;
        }
        Ok(())
    }
}

/// Gradient arrays, shape-congruent with the [`ModelParams`] they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(ModelParams);

impl Gradients {
    pub fn params(&self) -> &ModelParams {
        &self.0
    }

    pub fn named_arrays(&self) -> Vec<(String, &[f64])> {
        self.0.named_arrays()
    }

    pub fn flatten(&self) -> Vector {
        self.0.flatten()
    }

    fn check_finite(&self) -> Result<()> {
        for (name, a) in self.0.named_arrays() {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(FxError::NonFinite {
                    param: name,
                    step: 0,
                });
            }
        }
        Ok(())
    }

    fn clip(&mut self, limit: f64) {
        for a in self.0.arrays_mut() {
            for v in a.iter_mut() {
                *v = v.clamp(-limit, limit);
            }
        }
    }
}

/// Gradient of `½(target − y)²` for every parameter, unrolled over the whole
/// window, without dropout. Works for every architecture (the MLP case is
/// ordinary backpropagation).
pub fn bptt_gradients(params: &ModelParams, window: &[f64], target: f64) -> Result<Gradients> {
    gradients(params, window, target, None, None).map(|(_, g)| g)
}

/// Returns (prediction, gradients).
pub(crate) fn gradients(
    params: &ModelParams,
    window: &[f64],
    target: f64,
    masks: Option<&DropoutMasks>,
    horizon: Option<usize>,
) -> Result<(f64, Gradients)> {
    let horizon = horizon.unwrap_or(window.len());
    let (y, g) = match params {
        ModelParams::Rnn(p) => {
            let m = recurrent_masks(masks);
            let (y, g) = bptt::rnn_gradients(p, window, target, m, horizon)?;
            (y, ModelParams::Rnn(g))
        }
        ModelParams::Lstm(p) => {
            let m = recurrent_masks(masks);
            let (y, g) = bptt::lstm_gradients(p, window, target, m, horizon)?;
            (y, ModelParams::Lstm(g))
        }
        ModelParams::Mlp(p) => {
            let m = match masks {
                Some(DropoutMasks::Dense(m)) => Some(m.as_slice()),
                _ => None,
            };
            let (y, g) = backprop::mlp_gradients(p, window, target, m)?;
            (y, ModelParams::Mlp(g))
        }
    };
    let g = Gradients(g);
    g.check_finite()?;
    Ok((y, g))
}

fn recurrent_masks(masks: Option<&DropoutMasks>) -> Option<&[Vec<Vector>]> {
    match masks {
        Some(DropoutMasks::Recurrent(m)) => Some(m.as_slice()),
        _ => None,
    }
}

/// Masks for one training sample, or `None` when dropout is off.
fn sample_masks<R: Rng>(
    params: &ModelParams,
    steps: usize,
    rate: f64,
    rng: &mut R,
) -> Option<DropoutMasks> {
    if rate <= 0.0 {
        return None;
    }
    let per_layer = |widths: Vec<usize>, rng: &mut R| -> Vec<Vec<Vector>> {
        widths
            .into_iter()
            .map(|w| (0..steps).map(|_| dropout_mask(w, rate, rng)).collect())
            .collect()
    };
    Some(match params {
        ModelParams::Rnn(p) => {
            let widths = p
                .layers
                .iter()
                .rev()
                .skip(1)
                .rev()
                .map(|l| l.hidden_size())
                .collect();
            DropoutMasks::Recurrent(per_layer(widths, rng))
        }
        ModelParams::Lstm(p) => {
            let widths = p
                .layers
                .iter()
                .rev()
                .skip(1)
                .rev()
                .map(|l| l.hidden_size())
                .collect();
            DropoutMasks::Recurrent(per_layer(widths, rng))
        }
        ModelParams::Mlp(p) => {
            // hidden layers feeding another hidden layer; never the one before the output
            let n = p.layers.len().saturating_sub(2);
            DropoutMasks::Dense(
                p.layers[..n]
                    .iter()
                    .map(|l| dropout_mask(l.theta.len(), rate, rng))
                    .collect(),
            )
        }
    })
}

/// Mean of `(label − prediction)²` over the dataset, without dropout.
pub fn dataset_mse(model: &Model, data: &WindowedDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(FxError::EmptySample);
    }
    let mut sum = 0.0;
    for (x, t) in data.iter() {
        let y = model.forward(x)?;
        sum += (t - y) * (t - y);
    }
    Ok(sum / data.len() as f64)
}

/// Online gradient descent from freshly initialized parameters.
pub fn train(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    data: &WindowedDataset,
) -> Result<(Model, LossHistory)> {
    train_with_validation(spec, cfg, data, None)
}

/// As [`train`], also recording the MSE on `validation` after every epoch.
pub fn train_with_validation(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    data: &WindowedDataset,
    validation: Option<&WindowedDataset>,
) -> Result<(Model, LossHistory)> {
    cfg.validate()?;
    let mut model = init_params(spec)?;
    if data.is_empty() {
        return Err(FxError::EmptySample);
    }
    if data.window_len() != spec.window_len {
        return Err(FxError::Config(format!(
            "dataset windows have length {}, model expects {}",
            data.window_len(),
            spec.window_len
        )));
    }
    let mut history = LossHistory {
        train_mse: Vec::with_capacity(cfg.epochs),
        val_mse: validation.map(|_| Vec::with_capacity(cfg.epochs)),
    };
    if cfg.epochs == 0 {
        return Ok((model, history));
    }

    let initial = dataset_mse(&model, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lr = cfg.learning_rate;

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle_each_epoch {
            order.shuffle(&mut rng);
        }
        for &idx in &order {
            let (x, t) = (data.feature(idx), data.label(idx));
            let masks = sample_masks(&model.params, x.len(), cfg.dropout_rate, &mut rng);
            match (&mut model.params, cfg.clip_gradients) {
                (ModelParams::Mlp(p), false) => {
                    let m = match &masks {
                        Some(DropoutMasks::Dense(m)) => Some(m.as_slice()),
                        _ => None,
                    };
                    *p = backprop::mlp_backprop_step_masked(p, x, t, lr, m)?;
                }
                (params, clip) => {
                    let (_, mut g) = gradients(params, x, t, masks.as_ref(), cfg.bptt_horizon)?;
                    if clip {
                        g.clip(CLIP_VALUE);
                    }
                    params.add_scaled(-lr, g.params())?;
                }
            }
        }
        let mse = dataset_mse(&model, data)?;
        if !mse.is_finite() || mse > DIVERGENCE_FACTOR * initial.max(f64::MIN_POSITIVE) {
            return Err(FxError::Divergence {
                epoch,
                mse,
                initial,
            });
        }
        history.train_mse.push(mse);
        if let (Some(v), Some(out)) = (validation, history.val_mse.as_mut()) {
            out.push(dataset_mse(&model, v)?);
        }
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Architecture;
    use crate::numkit::ActivationKind;
    use crate::pipeline::make_windows;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let high = TrainConfig {
            learning_rate: 0.5,
            ..TrainConfig::default()
        };
        assert!(high.validate().is_err());
        assert!(TrainConfig {
            allow_lr_outside_paper: true,
            ..high
        }
        .validate()
        .is_ok());
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            bptt_horizon: Some(0),
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let spec = ModelSpec::desk(Architecture::Lstm).with_seed(4);
        let v: Vec<f64> = (0..30).map(|i| 0.5 + 0.1 * (i as f64).sin()).collect();
        let data = make_windows(&v, 10).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (m, h) = train(&spec, &cfg, &data).unwrap();
        assert_eq!(m, init_params(&spec).unwrap());
        assert_eq!(h.epochs(), 0);
    }

    #[test]
    fn constant_target_linear_mlp_converges() {
        let spec = ModelSpec {
            hidden_layers: 0,
            output_activation: ActivationKind::Linear,
            ..ModelSpec::desk(Architecture::Bp).with_seed(1)
        };
        let v = vec![0.6; 40];
        let data = make_windows(&v, 10).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            epochs: 200,
            dropout_rate: 0.0,
            ..TrainConfig::default()
        };
        let (_, h) = train(&spec, &cfg, &data).unwrap();
        assert!(
            *h.train_mse.last().unwrap() < 1e-8,
            "{:?}",
            h.train_mse.last()
        );
    }

    #[test]
    fn training_is_bit_reproducible() {
        let v: Vec<f64> = (0..60)
            .map(|i| 0.5 + 0.3 * (i as f64 * 0.3).sin())
            .collect();
        let data = make_windows(&v, 10).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        for arch in Architecture::ALL {
            let spec = ModelSpec::desk(arch).with_seed(2);
            let (a, ha) = train(&spec, &cfg, &data).unwrap();
            let (b, hb) = train(&spec, &cfg, &data).unwrap();
            let bits = |m: &Model| {
                m.params
                    .flatten()
                    .iter()
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>()
            };
            assert_eq!(bits(&a), bits(&b));
            assert_eq!(ha, hb);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let spec = ModelSpec {
            hidden_layers: 0,
            ..ModelSpec::desk(Architecture::Bp).with_seed(3)
        };
        let v: Vec<f64> = (0..40).map(|i| 50.0 * (i % 7) as f64).collect();
        let data = make_windows(&v, 10).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 5,
            dropout_rate: 0.0,
            ..TrainConfig::default()
        };
        let err = train(&spec, &cfg, &data).unwrap_err();
        assert!(
            matches!(err, FxError::Divergence { .. } | FxError::NonFinite { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn validation_history_tracks_epochs() {
        let v: Vec<f64> = (0..80)
            .map(|i| 0.5 + 0.3 * (i as f64 * 0.3).sin())
            .collect();
        let tr = make_windows(&v[..60], 10).unwrap();
        let va = make_windows(&v[60..], 10).unwrap();
        let cfg = TrainConfig {
            epochs: 4,
            ..TrainConfig::default()
        };
        let (_, h) =
            train_with_validation(&ModelSpec::desk(Architecture::Rnn), &cfg, &tr, Some(&va))
                .unwrap();
        assert_eq!(h.val_mse.as_ref().unwrap().len(), 4);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,train_mse,val_mse\n1,"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn clipping_bounds_every_entry() {
        let spec = ModelSpec::desk(Architecture::Rnn).with_seed(5);
        let m = init_params(&spec).unwrap();
        let mut g = bptt_gradients(&m.params, &[0.5; 10], 1e4).unwrap();
        assert!(g.flatten().iter().any(|v| v.abs() > CLIP_VALUE));
        g.clip(CLIP_VALUE);
        assert!(g.flatten().iter().all(|v| v.abs() <= CLIP_VALUE));
    }
}
