use crate::error::Result;
use crate::numkit::{ActivationKind, Matrix, Vector};

use super::{matrix_fan, shape_err, ModelSpec};

/// Fully connected layer. Row `j` of `w` holds the weights W_ij feeding neuron j.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Matrix,
    pub theta: Vector,
    pub activation: ActivationKind,
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize, activation: ActivationKind) -> Self {
        DenseLayer {
            w: Matrix::zeros(output, input),
            theta: vec![0.0; output],
            activation,
        }
    }

    /// Returns (I, O) for this layer.
    pub(crate) fn eval(&self, x: &[f64]) -> Result<(Vector, Vector)> {
        let mut i = self.w.matvec(x)?;
        for (v, t) in i.iter_mut().zip(&self.theta) {
            *v += t;
        }
        let o = self.activation.apply_all(&i);
        Ok((i, o))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

impl MlpParams {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].w.rows() != pair[1].w.cols() {
                return Err(shape_err(
                    "MlpParams chain",
                    pair[0].w.rows(),
                    pair[1].w.cols(),
                ));
            }
        }
        Ok(MlpParams { layers })
    }

    /// window → hidden × `hidden_layers` → 1.
    pub fn zeros(spec: &ModelSpec) -> Self {
        let mut layers = Vec::with_capacity(spec.hidden_layers + 1);
        let mut width = spec.window_len;
        for _ in 0..spec.hidden_layers {
            layers.push(DenseLayer::zeros(
                width,
                spec.hidden_size,
                spec.hidden_activation,
            ));
            width = spec.hidden_size;
        }
        layers.push(DenseLayer::zeros(width, 1, spec.output_activation));
        MlpParams { layers }
    }

    pub(crate) fn named_arrays(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            out.push((format!("dense[{k}].W"), layer.w.as_slice()));
            out.push((format!("dense[{k}].theta"), layer.theta.as_slice()));
        }
        out
    }

    pub(crate) fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in self.layers.iter_mut() {
            out.push(layer.w.as_mut_slice());
            out.push(layer.theta.as_mut_slice());
        }
        out
    }

    pub(crate) fn fans(&self) -> Vec<Option<(usize, usize)>> {
        self.layers
            .iter()
            .flat_map(|l| [matrix_fan(&l.w), None])
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MlpForward {
    pub prediction: f64,
    /// Net input I_j of every layer.
    pub net: Vec<Vector>,
    /// Output O_j of every layer.
    pub out: Vec<Vector>,
    /// What each layer consumed, after any dropout; `inputs[0]` is the window.
    pub(crate) inputs: Vec<Vector>,
}

pub fn mlp_forward(p: &MlpParams, x: &[f64]) -> Result<MlpForward> {
    mlp_forward_masked(p, x, None)
}

/// `masks[k]` multiplies hidden layer `k`'s output before layer `k+1` reads it.
pub(crate) fn mlp_forward_masked(
    p: &MlpParams,
    x: &[f64],
    masks: Option<&[Vector]>,
) -> Result<MlpForward> {
    let mut net = Vec::with_capacity(p.layers.len());
    let mut out = Vec::with_capacity(p.layers.len());
    let mut inputs = Vec::with_capacity(p.layers.len());
    let mut current = x.to_vec();
    for (k, layer) in p.layers.iter().enumerate() {
        let (i, o) = layer.eval(&current)?;
        let next = match masks.and_then(|m| m.get(k)) {
            Some(m) => crate::numkit::hadamard(&o, m),
            None => o.clone(),
        };
        inputs.push(std::mem::replace(&mut current, next));
        net.push(i);
        out.push(o);
    }
    let prediction = out.last().and_then(|o| o.first()).copied().unwrap_or(0.0);
    Ok(MlpForward {
        prediction,
        net,
        out,
        inputs,
    })
}
