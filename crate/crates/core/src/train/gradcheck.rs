use crate::error::Result;
use crate::models::{init_params, Model, ModelSpec};

use super::bptt_gradients;

/// Largest relative disagreement between the analytic gradient and a central
/// difference `(L(w+ε) − L(w−ε)) / 2ε`, over every parameter of a freshly
/// initialized model. Loss is `½(target − y)²`; dropout is off.
pub fn gradient_check(spec: &ModelSpec, sample: (&[f64], f64), eps: f64) -> Result<f64> {
    let model = init_params(spec)?;
    gradient_check_model(&model, sample, eps)
}

/// [`gradient_check`] on given parameters.
pub fn gradient_check_model(model: &Model, sample: (&[f64], f64), eps: f64) -> Result<f64> {
    let (window, target) = sample;
    let analytic = bptt_gradients(&model.params, window, target)?.flatten();
    let base = model.params.flatten();
    let mut probe = model.clone();
    let mut loss_at = |flat: &[f64]| -> Result<f64> {
        probe.params.assign_flat(flat)?;
        let y = probe.forward(window)?;
        Ok(0.5 * (target - y) * (target - y))
    };
    let mut worst: f64 = 0.0;
    let mut w = base.clone();
    for k in 0..base.len() {
        w[k] = base[k] + eps;
        let up = loss_at(&w)?;
        w[k] = base[k] - eps;
        let down = loss_at(&w)?;
        w[k] = base[k];
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}
