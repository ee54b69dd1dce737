//! Parameter containers and forward passes for the three forecasters:
//! a stacked simple recurrent network, a stacked LSTM and a feedforward
//! multilayer perceptron (the "BP" network).

pub(crate) mod lstm;
pub(crate) mod mlp;
mod persist;
pub(crate) mod rnn;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FxError, Result};
use crate::numkit::{ActivationKind, Matrix, Vector};
use crate::pipeline::Scaler;

pub use lstm::{lstm_forward, lstm_step, GateCache, LstmForward, LstmLayer, LstmParams, LstmState};
pub use mlp::{mlp_forward, DenseLayer, MlpForward, MlpParams};
pub use persist::{read_model, write_model, MODEL_FORMAT_VERSION};
pub use rnn::{rnn_forward, rnn_step, RnnForward, RnnLayer, RnnParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Lstm,
    #[serde(alias = "mlp")]
    Bp,
    Rnn,
}

impl Architecture {
    /// Column order of the comparison table.
    pub const ALL: [Architecture; 3] = [Architecture::Lstm, Architecture::Bp, Architecture::Rnn];

    pub fn slug(self) -> &'static str {
        match self {
            Architecture::Lstm => "lstm",
            Architecture::Bp => "bp",
            Architecture::Rnn => "rnn",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Lstm => "LSTM",
            Architecture::Bp => "BP",
            Architecture::Rnn => "RNN",
        })
    }
}

impl FromStr for Architecture {
    type Err = FxError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(Architecture::Lstm),
            "bp" | "mlp" => Ok(Architecture::Bp),
            "rnn" => Ok(Architecture::Rnn),
            other => Err(FxError::Config(format!(
                "unknown architecture '{other}' (expected lstm, rnn or bp)"
            ))),
        }
    }
}

/// Shape and hyper-parameters of one forecaster.
///
/// `hidden_layers` counts layers stacked on top of the input layer. For the
/// recurrent models the input layer is itself recurrent, so a model has
/// `1 + hidden_layers` recurrent layers followed by a dense readout. For the
/// MLP the input layer is the raw window, so it has `hidden_layers` dense
/// hidden layers followed by the output layer.
///
/// Activations per architecture:
/// - LSTM: `input_activation` is applied to the first layer's output on its
///   way up the stack; gate and cell nonlinearities are fixed (sigmoid/tanh),
///   so `hidden_activation` must be `Tanh`.
/// - RNN: `input_activation` is the cell function of the first layer,
///   `hidden_activation` of the others.
/// - BP: every hidden layer uses `hidden_activation`; `input_activation` is
///   unused.
///
/// `output_activation` always drives the final scalar output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub window_len: usize,
    pub hidden_layers: usize,
    pub hidden_size: usize,
    pub input_activation: ActivationKind,
    pub hidden_activation: ActivationKind,
    pub output_activation: ActivationKind,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl ModelSpec {
    /// Full-size profile: window 10, input layer plus six hidden layers of
    /// 128 units, linear output, dropout 0.1.
    pub fn reproduction(architecture: Architecture) -> Self {
        let input_activation = match architecture {
            Architecture::Lstm => ActivationKind::Relu,
            Architecture::Rnn | Architecture::Bp => ActivationKind::Tanh,
        };
        ModelSpec {
            architecture,
            window_len: 10,
            hidden_layers: 6,
            hidden_size: 128,
            input_activation,
            hidden_activation: ActivationKind::Tanh,
            output_activation: ActivationKind::Linear,
            dropout_rate: 0.1,
            seed: 0,
        }
    }

    /// Small profile for tests and quick experiments: two recurrent layers of
    /// 16 units (or two dense hidden layers for BP).
    pub fn desk(architecture: Architecture) -> Self {
        ModelSpec {
            hidden_layers: if architecture == Architecture::Bp {
                2
            } else {
                1
            },
            hidden_size: 16,
            ..ModelSpec::reproduction(architecture)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 1 {
            return Err(FxError::Config("window_len must be at least 1".into()));
        }
        if self.hidden_size < 1 {
            return Err(FxError::Config("hidden_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(FxError::Config(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.architecture == Architecture::Lstm && self.hidden_activation != ActivationKind::Tanh
        {
            return Err(FxError::Config(
                "LSTM cell nonlinearity is fixed; hidden_activation must be tanh".into(),
            ));
        }
        Ok(())
    }

    /// Sizes of the stacked recurrent layers, as (input size, hidden size).
    fn recurrent_dims(&self) -> Vec<(usize, usize)> {
        let h = self.hidden_size;
        std::iter::once((1, h))
            .chain(std::iter::repeat_n((h, h), self.hidden_layers))
            .collect()
    }
}

/// Dense map from the top hidden state to the scalar prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub w: Vector,
    pub b: f64,
    pub activation: ActivationKind,
}

impl Readout {
    pub fn zeros(n: usize, activation: ActivationKind) -> Self {
        Readout {
            w: vec![0.0; n],
            b: 0.0,
            activation,
        }
    }

    /// Returns (pre-activation, output).
    pub fn eval(&self, h: &[f64]) -> Result<(f64, f64)> {
        if h.len() != self.w.len() {
            return Err(FxError::Dimension {
                op: "readout",
                left: (1, self.w.len()),
                right: (h.len(), 1),
            });
        }
        let z = crate::numkit::dot(&self.w, h) + self.b;
        Ok((z, self.activation.apply(z)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Rnn(RnnParams),
    Lstm(LstmParams),
    Mlp(MlpParams),
}

impl ModelParams {
    /// All-zero parameters with the shapes `spec` implies.
    pub fn zeros(spec: &ModelSpec) -> Self {
        match spec.architecture {
            Architecture::Rnn => ModelParams::Rnn(RnnParams::zeros(spec)),
            Architecture::Lstm => ModelParams::Lstm(LstmParams::zeros(spec)),
            Architecture::Bp => ModelParams::Mlp(MlpParams::zeros(spec)),
        }
    }

    /// Every parameter array with a descriptive name, in canonical order.
    pub fn named_arrays(&self) -> Vec<(String, &[f64])> {
        match self {
            ModelParams::Rnn(p) => p.named_arrays(),
            ModelParams::Lstm(p) => p.named_arrays(),
            ModelParams::Mlp(p) => p.named_arrays(),
        }
    }

    /// Mutable view of the arrays, same order as [`ModelParams::named_arrays`].
    pub fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            ModelParams::Rnn(p) => p.arrays_mut(),
            ModelParams::Lstm(p) => p.arrays_mut(),
            ModelParams::Mlp(p) => p.arrays_mut(),
        }
    }

    /// (fan_in, fan_out) for each array in canonical order; biases report None.
    fn fans(&self) -> Vec<Option<(usize, usize)>> {
        match self {
            ModelParams::Rnn(p) => p.fans(),
            ModelParams::Lstm(p) => p.fans(),
            ModelParams::Mlp(p) => p.fans(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.named_arrays().iter().map(|(_, a)| a.len()).sum()
    }

    pub fn flatten(&self) -> Vector {
        self.named_arrays()
            .into_iter()
            .flat_map(|(_, a)| a.iter().copied())
            .collect()
    }

    /// Overwrites every parameter from a flat vector in canonical order.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(FxError::Dimension {
                op: "assign_flat",
                left: (self.num_params(), 1),
                right: (flat.len(), 1),
            });
        }
        let mut at = 0;
        for a in self.arrays_mut() {
            a.copy_from_slice(&flat[at..at + a.len()]);
            at += a.len();
        }
        Ok(())
    }

    /// `self += scale · other` for a shape-congruent `other`.
    pub fn add_scaled(&mut self, scale: f64, other: &ModelParams) -> Result<()> {
        let src = other.flatten();
        if src.len() != self.num_params() {
            return Err(FxError::Dimension {
                op: "add_scaled",
                left: (self.num_params(), 1),
                right: (src.len(), 1),
            });
        }
        let mut at = 0;
        for a in self.arrays_mut() {
            crate::numkit::axpy(scale, &src[at..at + a.len()], a);
            at += a.len();
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            ModelParams::Rnn(_) => Architecture::Rnn,
            ModelParams::Lstm(_) => Architecture::Lstm,
            ModelParams::Mlp(_) => Architecture::Bp,
        }
    }
}

/// A spec together with concrete parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: ModelParams,
}

impl Model {
    /// Scalar prediction on a scaled window, without dropout.
    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        if window.len() != self.spec.window_len {
            return Err(FxError::Config(format!(
                "window has {} values, model expects {}",
                window.len(),
                self.spec.window_len
            )));
        }
        match &self.params {
            ModelParams::Rnn(p) => rnn_forward(p, window).map(|f| f.prediction),
            ModelParams::Lstm(p) => lstm_forward(p, window).map(|f| f.prediction),
            ModelParams::Mlp(p) => mlp_forward(p, window).map(|f| f.prediction),
        }
    }
}

/// Uniform fan-based initialization, `U(−a, a)` with `a = √(6/(fan_in+fan_out))`;
/// biases start at zero. Seeded from `spec.seed` only.
pub fn init_params(spec: &ModelSpec) -> Result<Model> {
    spec.validate()?;
    let mut params = ModelParams::zeros(spec);
    let fans = params.fans();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for (array, fan) in params.arrays_mut().into_iter().zip(fans) {
        if let Some((fan_in, fan_out)) = fan {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in array.iter_mut() {
                *w = rng.random_range(-a..a);
            }
        }
    }
    Ok(Model {
        spec: *spec,
        params,
    })
}

/// Scales a raw window, runs the model, and maps the output back to rate units.
pub fn predict(model: &Model, scaler: &Scaler, raw_window: &[f64]) -> Result<f64> {
    let scaled = scaler.scale_all(raw_window);
    model.forward(&scaled).map(|y| scaler.unscale(y))
}

pub(crate) fn shape_err(op: &'static str, expected: usize, got: usize) -> FxError {
    FxError::Dimension {
        op,
        left: (expected, 1),
        right: (got, 1),
    }
}

pub(crate) fn matrix_fan(m: &Matrix) -> Option<(usize, usize)> {
    Some((m.cols(), m.rows()))
}
