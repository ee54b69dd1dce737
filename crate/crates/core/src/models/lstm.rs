use crate::error::Result;
use crate::numkit::{sigmoid, ActivationKind, Matrix, Vector};

use super::{matrix_fan, shape_err, ModelSpec, Readout};

/// One LSTM layer. Every gate matrix acts on the concatenation
/// `[h_{t−1}, x_t]`, so each is hidden × (hidden + input).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub b_f: Vector,
    pub b_i: Vector,
    pub b_c: Vector,
    pub b_o: Vector,
    /// Applied to h_t before it is handed to the next layer; the recurrent
    /// state itself is untouched.
    pub output_activation: ActivationKind,
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize, output_activation: ActivationKind) -> Self {
        let m = || Matrix::zeros(hidden, hidden + input);
        LstmLayer {
            w_f: m(),
            w_i: m(),
            w_c: m(),
            w_o: m(),
            b_f: vec![0.0; hidden],
            b_i: vec![0.0; hidden],
            b_c: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
            output_activation,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.b_f.len()
    }

    pub fn input_size(&self) -> usize {
        self.w_f.cols() - self.hidden_size()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vector,
    pub c: Vector,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything one step computed that backpropagation needs.
#[derive(Debug, Clone)]
pub struct GateCache {
    /// `[h_{t−1}, x_t]`
    pub z: Vector,
    pub f: Vector,
    pub i: Vector,
    /// Candidate cell state C̃_t.
    pub g: Vector,
    pub o: Vector,
    pub c_prev: Vector,
    pub c: Vector,
    pub tanh_c: Vector,
    pub h: Vector,
}

/// One LSTM time step:
///
/// ```text
/// f = σ(W_f z + b_f)   i = σ(W_i z + b_i)   C̃ = tanh(W_c z + b_c)
/// C = f∘C_prev + i∘C̃   o = σ(W_o z + b_o)   h = o∘tanh(C)
/// ```
pub fn lstm_step(
    layer: &LstmLayer,
    x_t: &[f64],
    state: &LstmState,
) -> Result<(LstmState, GateCache)> {
    let hidden = layer.hidden_size();
    if state.h.len() != hidden || state.c.len() != hidden {
        return Err(shape_err(
            "lstm_step state",
            hidden,
            state.h.len().max(state.c.len()),
        ));
    }
    if x_t.len() != layer.input_size() {
        return Err(shape_err("lstm_step x_t", layer.input_size(), x_t.len()));
    }
    let mut z = Vec::with_capacity(hidden + x_t.len());
    z.extend_from_slice(&state.h);
    z.extend_from_slice(x_t);

    let gate = |w: &Matrix, b: &[f64], act: fn(f64) -> f64| -> Result<Vector> {
        Ok(w.matvec(&z)?
            .iter()
            .zip(b)
            .map(|(a, b)| act(a + b))
            .collect())
    };
    let f = gate(&layer.w_f, &layer.b_f, sigmoid)?;
    let i = gate(&layer.w_i, &layer.b_i, sigmoid)?;
    let g = gate(&layer.w_c, &layer.b_c, f64::tanh)?;
    let o = gate(&layer.w_o, &layer.b_o, sigmoid)?;

    let c: Vector = (0..hidden)
        .map(|k| f[k] * state.c[k] + i[k] * g[k])
        .collect();
    let tanh_c: Vector = c.iter().map(|v| v.tanh()).collect();
    let h: Vector = o.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();

    let next = LstmState {
        h: h.clone(),
        c: c.clone(),
    };
    let cache = GateCache {
        z,
        f,
        i,
        g,
        o,
        c_prev: state.c.clone(),
        c,
        tanh_c,
        h,
    };
    Ok((next, cache))
}

/// Stacked LSTM layers with a dense readout on the last time step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub layers: Vec<LstmLayer>,
    pub readout: Readout,
}

impl LstmParams {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let layers = spec
            .recurrent_dims()
            .into_iter()
            .enumerate()
            .map(|(l, (i, h))| {
                let act = if l == 0 {
                    spec.input_activation
                } else {
                    ActivationKind::Linear
                };
                LstmLayer::zeros(i, h, act)
            })
            .collect();
        LstmParams {
            layers,
            readout: Readout::zeros(spec.hidden_size, spec.output_activation),
        }
    }

    pub(crate) fn named_arrays(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("lstm[{l}].W_f"), layer.w_f.as_slice()));
            out.push((format!("lstm[{l}].W_i"), layer.w_i.as_slice()));
            out.push((format!("lstm[{l}].W_c"), layer.w_c.as_slice()));
            out.push((format!("lstm[{l}].W_o"), layer.w_o.as_slice()));
            out.push((format!("lstm[{l}].b_f"), layer.b_f.as_slice()));
            out.push((format!("lstm[{l}].b_i"), layer.b_i.as_slice()));
            out.push((format!("lstm[{l}].b_c"), layer.b_c.as_slice()));
            out.push((format!("lstm[{l}].b_o"), layer.b_o.as_slice()));
        }
        out.push(("readout.w".into(), self.readout.w.as_slice()));
        out.push(("readout.b".into(), std::slice::from_ref(&self.readout.b)));
        out
    }

    pub(crate) fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in self.layers.iter_mut() {
            out.push(layer.w_f.as_mut_slice());
            out.push(layer.w_i.as_mut_slice());
            out.push(layer.w_c.as_mut_slice());
            out.push(layer.w_o.as_mut_slice());
            out.push(layer.b_f.as_mut_slice());
            out.push(layer.b_i.as_mut_slice());
            out.push(layer.b_c.as_mut_slice());
            out.push(layer.b_o.as_mut_slice());
        }
        out.push(self.readout.w.as_mut_slice());
        out.push(std::slice::from_mut(&mut self.readout.b));
        out
    }

    pub(crate) fn fans(&self) -> Vec<Option<(usize, usize)>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for m in [&layer.w_f, &layer.w_i, &layer.w_c, &layer.w_o] {
                out.push(matrix_fan(m));
            }
            out.extend([None, None, None, None]);
        }
        out.push(Some((self.readout.w.len(), 1)));
        out.push(None);
        out
    }
}

#[derive(Debug, Clone)]
pub struct LstmForward {
    pub prediction: f64,
    /// `caches[layer][t]`
    pub caches: Vec<Vec<GateCache>>,
    pub(crate) readout_pre: f64,
}

impl LstmForward {
    /// Output of layer `l` at step `t` as seen by the layer above (before dropout).
    pub fn layer_output(&self, params: &LstmParams, l: usize, t: usize) -> Vector {
        params.layers[l]
            .output_activation
            .apply_all(&self.caches[l][t].h)
    }
}

/// Runs the stack from zero h and C in every layer.
pub fn lstm_forward(p: &LstmParams, window: &[f64]) -> Result<LstmForward> {
    lstm_forward_masked(p, window, None)
}

/// `masks[l][t]` multiplies layer `l`'s output before it enters layer `l+1`.
pub(crate) fn lstm_forward_masked(
    p: &LstmParams,
    window: &[f64],
    masks: Option<&[Vec<Vector>]>,
) -> Result<LstmForward> {
    if window.is_empty() {
        return Err(shape_err("lstm_forward window", 1, 0));
    }
    let mut seq: Vec<Vector> = window.iter().map(|&v| vec![v]).collect();
    let mut caches = Vec::with_capacity(p.layers.len());
    for (l, layer) in p.layers.iter().enumerate() {
        let mut state = LstmState::zeros(layer.hidden_size());
        let mut layer_caches = Vec::with_capacity(seq.len());
        let mut next = Vec::with_capacity(seq.len());
        for (t, x) in seq.iter().enumerate() {
            let (s, cache) = lstm_step(layer, x, &state)?;
            let mut out = layer.output_activation.apply_all(&s.h);
            if let Some(m) = masks.and_then(|m| m.get(l)) {
                out = crate::numkit::hadamard(&out, &m[t]);
            }
            next.push(out);
            layer_caches.push(cache);
            state = s;
        }
        seq = next;
        caches.push(layer_caches);
    }
    // the readout reads the top layer's output
    let top = seq.last().expect("non-empty");
    let (readout_pre, prediction) = p.readout.eval(top)?;
    Ok(LstmForward {
        prediction,
        caches,
        readout_pre,
    })
}
