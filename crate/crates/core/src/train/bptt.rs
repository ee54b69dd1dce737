//! Backpropagation through time for the stacked recurrent models.
//!
//! Gradients are of `½(T − y)²`, unrolled over the last `horizon` steps of
//! the window.

use crate::error::{FxError, Result};
use crate::models::lstm::lstm_forward_masked;
use crate::models::rnn::rnn_forward_masked;
use crate::models::{LstmParams, RnnParams};
use crate::numkit::{hadamard, Vector};

fn ensure_finite(v: &[f64], param: impl FnOnce() -> String, step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(FxError::NonFinite {
            param: param(),
            step,
        })
    }
}

/// Gradient wrt each layer's output sequence, seeded with the readout at the
/// final step.
fn seed_top(readout_w: &[f64], dr: f64, steps: usize) -> Vec<Vector> {
    let mut d = vec![vec![0.0; readout_w.len()]; steps];
    d[steps - 1] = readout_w.iter().map(|w| w * dr).collect();
    d
}

pub(crate) fn rnn_gradients(
    p: &RnnParams,
    window: &[f64],
    target: f64,
    masks: Option<&[Vec<Vector>]>,
    horizon: usize,
) -> Result<(f64, RnnParams)> {
    let fwd = rnn_forward_masked(p, window, masks)?;
    let steps = window.len();
    let t_min = steps.saturating_sub(horizon.max(1));
    let mut g = p.clone();
    zero_rnn(&mut g);

    let dy = fwd.prediction - target;
    let dr = dy * p.readout.activation.prime(fwd.readout_pre);
    let top = p.layers.len() - 1;
    let h_last = &fwd.states[top][steps - 1];
    g.readout.w = h_last.iter().map(|h| dr * h).collect();
    g.readout.b = dr;
    let mut d_out = seed_top(&p.readout.w, dr, steps);

    for l in (0..p.layers.len()).rev() {
        let layer = &p.layers[l];
        let hidden = layer.hidden_size();
        let gl = &mut g.layers[l];
        let mut dh_next = vec![0.0; hidden];
        let mut dx = vec![vec![0.0; layer.input_size()]; steps];
        let zeros = vec![0.0; hidden];
        for t in (t_min..steps).rev() {
            let da: Vector = (0..hidden)
                .map(|k| (d_out[t][k] + dh_next[k]) * layer.activation.prime(fwd.pre[l][t][k]))
                .collect();
            ensure_finite(&da, || format!("rnn[{l}] pre-activation"), t)?;
            let h_prev = if t == 0 {
                &zeros
            } else {
                &fwd.states[l][t - 1]
            };
            gl.u.add_outer(1.0, &da, &fwd.inputs[l][t])?;
            gl.w.add_outer(1.0, &da, h_prev)?;
            crate::numkit::axpy(1.0, &da, &mut gl.b);
            dx[t] = layer.u.matvec_transposed(&da)?;
            dh_next = layer.w.matvec_transposed(&da)?;
        }
        if l > 0 {
            d_out = match masks.and_then(|m| m.get(l - 1)) {
                Some(mask) => dx.iter().zip(mask).map(|(d, m)| hadamard(d, m)).collect(),
                None => dx,
            };
        }
    }
    Ok((fwd.prediction, g))
}

fn zero_rnn(g: &mut RnnParams) {
    for layer in g.layers.iter_mut() {
        layer.u.as_mut_slice().fill(0.0);
        layer.w.as_mut_slice().fill(0.0);
        layer.b.fill(0.0);
    }
}

pub(crate) fn lstm_gradients(
    p: &LstmParams,
    window: &[f64],
    target: f64,
    masks: Option<&[Vec<Vector>]>,
    horizon: usize,
) -> Result<(f64, LstmParams)> {
    let fwd = lstm_forward_masked(p, window, masks)?;
    let steps = window.len();
    let t_min = steps.saturating_sub(horizon.max(1));
    let mut g = p.clone();
    zero_lstm(&mut g);

    let dy = fwd.prediction - target;
    let dr = dy * p.readout.activation.prime(fwd.readout_pre);
    let top = p.layers.len() - 1;
    let top_out = fwd.layer_output(p, top, steps - 1);
    g.readout.w = top_out.iter().map(|h| dr * h).collect();
    g.readout.b = dr;
    let mut d_out = seed_top(&p.readout.w, dr, steps);

    for l in (0..p.layers.len()).rev() {
        let layer = &p.layers[l];
        let hidden = layer.hidden_size();
        let gl = &mut g.layers[l];
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let mut dx = vec![vec![0.0; layer.input_size()]; steps];
        for t in (t_min..steps).rev() {
            let c = &fwd.caches[l][t];
            let mut d_f = vec![0.0; hidden];
            let mut d_i = vec![0.0; hidden];
            let mut d_g = vec![0.0; hidden];
            let mut d_o = vec![0.0; hidden];
            for k in 0..hidden {
                let dh = d_out[t][k] * layer.output_activation.prime(c.h[k]) + dh_next[k];
                let dc = dc_next[k] + dh * c.o[k] * (1.0 - c.tanh_c[k] * c.tanh_c[k]);
                d_o[k] = dh * c.tanh_c[k] * c.o[k] * (1.0 - c.o[k]);
                d_f[k] = dc * c.c_prev[k] * c.f[k] * (1.0 - c.f[k]);
                d_i[k] = dc * c.g[k] * c.i[k] * (1.0 - c.i[k]);
                d_g[k] = dc * c.i[k] * (1.0 - c.g[k] * c.g[k]);
                dc_next[k] = dc * c.f[k];
            }
            for (name, d) in [("f", &d_f), ("i", &d_i), ("c", &d_g), ("o", &d_o)] {
                ensure_finite(d, || format!("lstm[{l}] gate {name}"), t)?;
            }
            gl.w_f.add_outer(1.0, &d_f, &c.z)?;
            gl.w_i.add_outer(1.0, &d_i, &c.z)?;
            gl.w_c.add_outer(1.0, &d_g, &c.z)?;
            gl.w_o.add_outer(1.0, &d_o, &c.z)?;
            crate::numkit::axpy(1.0, &d_f, &mut gl.b_f);
            crate::numkit::axpy(1.0, &d_i, &mut gl.b_i);
            crate::numkit::axpy(1.0, &d_g, &mut gl.b_c);
            crate::numkit::axpy(1.0, &d_o, &mut gl.b_o);

            let mut dz = layer.w_f.matvec_transposed(&d_f)?;
            for (w, d) in [(&layer.w_i, &d_i), (&layer.w_c, &d_g), (&layer.w_o, &d_o)] {
                crate::numkit::axpy(1.0, &w.matvec_transposed(d)?, &mut dz);
            }
            dx[t] = dz.split_off(hidden);
            dh_next = dz;
        }
        if l > 0 {
            d_out = match masks.and_then(|m| m.get(l - 1)) {
                Some(mask) => dx.iter().zip(mask).map(|(d, m)| hadamard(d, m)).collect(),
                None => dx,
            };
        }
    }
    Ok((fwd.prediction, g))
}

fn zero_lstm(g: &mut LstmParams) {
    for layer in g.layers.iter_mut() {
        for m in [
            &mut layer.w_f,
            &mut layer.w_i,
            &mut layer.w_c,
            &mut layer.w_o,
        ] {
            m.as_mut_slice().fill(0.0);
        }
        for b in [
            &mut layer.b_f,
            &mut layer.b_i,
            &mut layer.b_c,
            &mut layer.b_o,
        ] {
            b.fill(0.0);
        }
    }
}
