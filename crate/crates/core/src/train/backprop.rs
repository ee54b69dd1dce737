//! Error backpropagation for the feedforward network, in the ascent form
//! `W ← W + λ·E_j·O_i`.

use crate::error::{FxError, Result};
use crate::models::MlpParams;
use crate::numkit::Vector;

/// One online update of the MLP towards `target`:
///
/// - output error `E_j = f′(I_j)·(T_j − O_j)`
/// - hidden error `E_j = f′(I_j)·Σ_k E_k·W_jk`
/// - `W_ij ← W_ij + λ·E_j·O_i` and `θ_j ← θ_j + λ·E_j`
///
/// All errors are computed from the pre-update weights. With sigmoid units
/// `f′(I_j) = O_j(1 − O_j)`.
pub fn mlp_backprop_step(
    p: &MlpParams,
    x: &[f64],
    target: f64,
    learning_rate: f64,
) -> Result<MlpParams> {
    mlp_backprop_step_masked(p, x, target, learning_rate, None)
}

pub(crate) fn mlp_backprop_step_masked(
    p: &MlpParams,
    x: &[f64],
    target: f64,
    learning_rate: f64,
    masks: Option<&[Vector]>,
) -> Result<MlpParams> {
    let fwd = crate::models::mlp::mlp_forward_masked(p, x, masks)?;
    let errors = layer_errors(p, &fwd, target, masks)?;
    let mut next = p.clone();
    for (k, layer) in next.layers.iter_mut().enumerate() {
        layer
            .w
            .add_outer(learning_rate, &errors[k], &fwd.inputs[k])?;
        crate::numkit::axpy(learning_rate, &errors[k], &mut layer.theta);
    }
    Ok(next)
}

/// E_j for every layer, output layer last.
fn layer_errors(
    p: &MlpParams,
    fwd: &crate::models::MlpForward,
    target: f64,
    masks: Option<&[Vector]>,
) -> Result<Vec<Vector>> {
    let n = p.layers.len();
    let mut errors: Vec<Vector> = vec![Vec::new(); n];
    let last = n - 1;
    errors[last] = fwd.net[last]
        .iter()
        .zip(&fwd.out[last])
        .map(|(&i, &o)| p.layers[last].activation.prime(i) * (target - o))
        .collect();
    for k in (0..last).rev() {
        let mut back = p.layers[k + 1].w.matvec_transposed(&errors[k + 1])?;
        if let Some(m) = masks.and_then(|m| m.get(k)) {
            back = crate::numkit::hadamard(&back, m);
        }
        errors[k] = back
            .iter()
            .zip(&fwd.net[k])
            .map(|(s, &i)| p.layers[k].activation.prime(i) * s)
            .collect();
    }
    for (k, e) in errors.iter().enumerate() {
        if e.iter().any(|v| !v.is_finite()) {
            return Err(FxError::NonFinite {
                param: format!("dense[{k}] error signal"),
                step: 0,
            });
        }
    }
    Ok(errors)
}

/// Gradient of `½(T − y)²` for every MLP parameter. This is exactly
/// `−E_j·O_i` (and `−E_j` for θ), so a descent step with it equals
/// [`mlp_backprop_step`].
pub(crate) fn mlp_gradients(
    p: &MlpParams,
    x: &[f64],
    target: f64,
    masks: Option<&[Vector]>,
) -> Result<(f64, MlpParams)> {
    let fwd = crate::models::mlp::mlp_forward_masked(p, x, masks)?;
    let n = p.layers.len();
    let mut grads = p.clone();
    // delta_k = ∂L/∂I_k
    let last = n - 1;
    let mut delta: Vector = fwd.net[last]
        .iter()
        .zip(&fwd.out[last])
        .map(|(&i, &o)| p.layers[last].activation.prime(i) * (o - target))
        .collect();
    for k in (0..n).rev() {
        let g = &mut grads.layers[k];
        g.w.as_mut_slice().fill(0.0);
        g.w.add_outer(1.0, &delta, &fwd.inputs[k])?;
        g.theta.copy_from_slice(&delta);
        if k > 0 {
            let mut back = p.layers[k].w.matvec_transposed(&delta)?;
            if let Some(m) = masks.and_then(|m| m.get(k - 1)) {
                back = crate::numkit::hadamard(&back, m);
            }
            delta = back
                .iter()
                .zip(&fwd.net[k - 1])
                .map(|(s, &i)| p.layers[k - 1].activation.prime(i) * s)
                .collect();
        }
    }
    Ok((fwd.prediction, grads))
}
