use crate::error::Result;
use crate::numkit::{add, ActivationKind, Matrix, Vector};

use super::{matrix_fan, shape_err, ModelSpec, Readout};

/// One simple recurrent layer, `h_t = f(U x_t + W h_{t−1} + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnLayer {
    /// hidden × input
    pub u: Matrix,
    /// hidden × hidden
    pub w: Matrix,
    pub b: Vector,
    pub activation: ActivationKind,
}

impl RnnLayer {
    pub fn zeros(input: usize, hidden: usize, activation: ActivationKind) -> Self {
        RnnLayer {
            u: Matrix::zeros(hidden, input),
            w: Matrix::zeros(hidden, hidden),
            b: vec![0.0; hidden],
            activation,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.b.len()
    }

    pub fn input_size(&self) -> usize {
        self.u.cols()
    }

    /// Returns (pre-activation, h_t).
    pub(crate) fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<(Vector, Vector)> {
        if h_prev.len() != self.hidden_size() {
            return Err(shape_err(
                "rnn_step h_prev",
                self.hidden_size(),
                h_prev.len(),
            ));
        }
        let mut a = add(&self.u.matvec(x)?, &self.w.matvec(h_prev)?);
        for (ai, bi) in a.iter_mut().zip(&self.b) {
            *ai += bi;
        }
        let h = self.activation.apply_all(&a);
        Ok((a, h))
    }
}

/// Stacked recurrent layers with a dense readout on the last time step.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    pub layers: Vec<RnnLayer>,
    pub readout: Readout,
}

impl RnnParams {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let layers = spec
            .recurrent_dims()
            .into_iter()
            .enumerate()
            .map(|(l, (i, h))| {
                let act = if l == 0 {
                    spec.input_activation
                } else {
                    spec.hidden_activation
                };
                RnnLayer::zeros(i, h, act)
            })
            .collect();
        RnnParams {
            layers,
            readout: Readout::zeros(spec.hidden_size, spec.output_activation),
        }
    }

    pub(crate) fn named_arrays(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("rnn[{l}].U"), layer.u.as_slice()));
            out.push((format!("rnn[{l}].W"), layer.w.as_slice()));
            out.push((format!("rnn[{l}].b"), layer.b.as_slice()));
        }
        out.push(("readout.w".into(), self.readout.w.as_slice()));
        out.push(("readout.b".into(), std::slice::from_ref(&self.readout.b)));
        out
    }

    pub(crate) fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in self.layers.iter_mut() {
            out.push(layer.u.as_mut_slice());
            out.push(layer.w.as_mut_slice());
            out.push(layer.b.as_mut_slice());
        }
        out.push(self.readout.w.as_mut_slice());
        out.push(std::slice::from_mut(&mut self.readout.b));
        out
    }

    pub(crate) fn fans(&self) -> Vec<Option<(usize, usize)>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(matrix_fan(&layer.u));
            out.push(matrix_fan(&layer.w));
            out.push(None);
        }
        out.push(Some((self.readout.w.len(), 1)));
        out.push(None);
        out
    }
}

/// Result of unrolling the network over one window.
#[derive(Debug, Clone)]
pub struct RnnForward {
    pub prediction: f64,
    /// `states[layer][t]` is h_t of that layer.
    pub states: Vec<Vec<Vector>>,
    pub(crate) pre: Vec<Vec<Vector>>,
    /// Input seen by each layer at each step, after any dropout.
    pub(crate) inputs: Vec<Vec<Vector>>,
    pub(crate) readout_pre: f64,
}

/// One step of a single layer.
pub fn rnn_step(layer: &RnnLayer, x_t: &[f64], h_prev: &[f64]) -> Result<Vector> {
    layer.step(x_t, h_prev).map(|(_, h)| h)
}

/// Unrolls every layer from zero initial state; the readout sees the top
/// layer's final h.
pub fn rnn_forward(p: &RnnParams, window: &[f64]) -> Result<RnnForward> {
    rnn_forward_masked(p, window, None)
}

/// `masks[l][t]` multiplies layer `l`'s output before it enters layer `l+1`.
pub(crate) fn rnn_forward_masked(
    p: &RnnParams,
    window: &[f64],
    masks: Option<&[Vec<Vector>]>,
) -> Result<RnnForward> {
    if window.is_empty() {
        return Err(shape_err("rnn_forward window", 1, 0));
    }
    let mut seq: Vec<Vector> = window.iter().map(|&v| vec![v]).collect();
    let mut states = Vec::with_capacity(p.layers.len());
    let mut pre = Vec::with_capacity(p.layers.len());
    let mut inputs = Vec::with_capacity(p.layers.len());
    for (l, layer) in p.layers.iter().enumerate() {
        let mut h = vec![0.0; layer.hidden_size()];
        let mut hs = Vec::with_capacity(seq.len());
        let mut pres = Vec::with_capacity(seq.len());
        for x in &seq {
            let (a, h_new) = layer.step(x, &h)?;
            h = h_new;
            pres.push(a);
            hs.push(h.clone());
        }
        let next: Vec<Vector> = match masks.and_then(|m| m.get(l)) {
            Some(mask) => hs
                .iter()
                .zip(mask)
                .map(|(h, m)| crate::numkit::hadamard(h, m))
                .collect(),
            None => hs.clone(),
        };
        inputs.push(std::mem::replace(&mut seq, next));
        states.push(hs);
        pre.push(pres);
    }
    let top = states.last().and_then(|s| s.last()).expect("non-empty");
    let (readout_pre, prediction) = p.readout.eval(top)?;
    Ok(RnnForward {
        prediction,
        states,
        pre,
        inputs,
        readout_pre,
    })
}
