//! Analytic gradients against central finite differences.

use fxcast_core::models::{init_params, Architecture, Model, ModelParams, ModelSpec};
use fxcast_core::numkit::ActivationKind;
use fxcast_core::train::{bptt_gradients, gradient_check, gradient_check_model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn sample(seed: u64, len: usize) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let w = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
    (w, rng.random_range(0.0..1.0))
}

fn mlp(hidden_layers: usize, hidden: usize, act: ActivationKind, window: usize) -> ModelSpec {
    ModelSpec {
        window_len: window,
        hidden_layers,
        hidden_size: hidden,
        hidden_activation: act,
        dropout_rate: 0.0,
        ..ModelSpec::desk(Architecture::Bp)
    }
}

fn rnn(hidden_layers: usize, hidden: usize, window: usize) -> ModelSpec {
    ModelSpec {
        window_len: window,
        hidden_layers,
        hidden_size: hidden,
        input_activation: ActivationKind::Tanh,
        hidden_activation: ActivationKind::Tanh,
        dropout_rate: 0.0,
        ..ModelSpec::desk(Architecture::Rnn)
    }
}

fn lstm(hidden_layers: usize, hidden: usize, window: usize) -> ModelSpec {
    ModelSpec {
        window_len: window,
        hidden_layers,
        hidden_size: hidden,
        dropout_rate: 0.0,
        ..ModelSpec::desk(Architecture::Lstm)
    }
}

fn check(spec: ModelSpec, seed: u64) -> f64 {
    let spec = spec.with_seed(seed);
    let (w, t) = sample(seed, spec.window_len);
    gradient_check(&spec, (&w, t), EPS).unwrap()
}

#[test]
fn linear_single_layer_mlp_is_exact() {
    let mut spec = mlp(0, 1, ActivationKind::Linear, 5);
    spec.output_activation = ActivationKind::Linear;
    let err = check(spec, 3);
    assert!(err <= 1e-9, "{err}");
}

#[test]
fn tanh_rnn_two_layers() {
    let err = check(rnn(1, 4, 5), 42);
    assert!(err <= TOL, "{err}");
}

#[test]
fn lstm_one_layer() {
    let mut spec = lstm(0, 4, 5);
    spec.input_activation = ActivationKind::Linear;
    let err = check(spec, 42);
    assert!(err <= TOL, "{err}");
}

/// Central differences computed here, independent of the library's checker.
fn fd_gradient(model: &Model, window: &[f64], target: f64) -> Vec<f64> {
    let base = model.params.flatten();
    let mut probe = model.clone();
    let mut loss = |flat: &[f64]| {
        probe.params.assign_flat(flat).unwrap();
        let y = probe.forward(window).unwrap();
        0.5 * (target - y).powi(2)
    };
    (0..base.len())
        .map(|k| {
            let mut w = base.clone();
            w[k] += EPS;
            let up = loss(&w);
            w[k] -= 2.0 * EPS;
            (up - loss(&w)) / (2.0 * EPS)
        })
        .collect()
}

// Entries whose true gradient is below ~1e-6 sit under the f64 roundoff
// floor of an ε = 1e-5 central difference (absolute noise ~1e-12, truncation ~1e-10 on O(1) entries), so LSTM
// stacks are checked absolutely everywhere and relatively above that floor.
#[test]
fn lstm_stacks_agree_with_finite_differences() {
    for seed in 0..5 {
        for spec in [lstm(0, 4, 5), lstm(1, 4, 5), lstm(1, 8, 8), lstm(2, 3, 6)] {
            let spec = spec.with_seed(seed);
            let model = init_params(&spec).unwrap();
            let (w, t) = sample(seed, spec.window_len);
            let analytic = bptt_gradients(&model.params, &w, t).unwrap().flatten();
            let numeric = fd_gradient(&model, &w, t);
            for (a, n) in analytic.iter().zip(&numeric) {
                assert!((a - n).abs() <= 1e-9, "seed {seed}: {a} vs {n}");
                let scale = a.abs().max(n.abs());
                if scale >= 1e-5 {
                    assert!((a - n).abs() / scale <= TOL, "seed {seed}: {a} vs {n}");
                }
            }
        }
    }
}

#[test]
fn checker_agrees_with_independent_differences() {
    let spec = rnn(1, 3, 4).with_seed(6);
    let model = init_params(&spec).unwrap();
    let (w, t) = sample(6, 4);
    let analytic = bptt_gradients(&model.params, &w, t).unwrap().flatten();
    let expected = analytic
        .iter()
        .zip(fd_gradient(&model, &w, t))
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-12))
        .fold(0.0, f64::max);
    assert_eq!(
        gradient_check_model(&model, (&w, t), EPS).unwrap(),
        expected
    );
}

#[test]
fn zero_rnn_has_zero_recurrent_gradient() {
    let spec = rnn(0, 1, 3);
    let model = Model {
        spec,
        params: ModelParams::zeros(&spec),
    };
    let g = bptt_gradients(&model.params, &[0.2, 0.4, 0.6], 0.8).unwrap();
    for (name, a) in g.named_arrays() {
        match name.as_str() {
            // dL/db_readout = (y − T)·1 = −0.8
            "readout.b" => assert_eq!(a, &[-0.8]),
            // every h is 0, and the readout weight is 0, so nothing flows back
            _ => assert!(a.iter().all(|&v| v == 0.0), "{name}: {a:?}"),
        }
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn one_step_window_matches_single_step_backprop() {
    let spec = rnn(0, 3, 1).with_seed(8);
    let model = init_params(&spec).unwrap();
    let ModelParams::Rnn(p) = &model.params else {
        unreachable!()
    };
    let (x, t) = (0.37, 0.9);
    let g = bptt_gradients(&model.params, &[x], t).unwrap();
    // hand chain rule: h = tanh(U x + b), y = v·h + c
    let layer = &p.layers[0];
    let a: Vec<f64> = (0..3).map(|k| layer.u.get(k, 0) * x + layer.b[k]).collect();
    let h: Vec<f64> = a.iter().map(|v| v.tanh()).collect();
    let y: f64 = h.iter().zip(&p.readout.w).map(|(h, w)| h * w).sum::<f64>() + p.readout.b;
    let dy = y - t;
    let arrays = g.named_arrays();
    let get = |n: &str| arrays.iter().find(|(k, _)| k == n).unwrap().1;
    for k in 0..3 {
        let da = dy * p.readout.w[k] * (1.0 - h[k] * h[k]);
        assert!((get("rnn[0].U")[k] - da * x).abs() < 1e-15);
        assert!((get("rnn[0].b")[k] - da).abs() < 1e-15);
        assert!((get("readout.w")[k] - dy * h[k]).abs() < 1e-15);
        assert!(get("rnn[0].W")[k * 3..k * 3 + 3].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn truncated_horizon_ignores_early_steps() {
    use fxcast_core::pipeline::make_windows;
    use fxcast_core::train::{train, TrainConfig};
    let spec = rnn(0, 4, 6).with_seed(1);
    let v: Vec<f64> = (0..30)
        .map(|i| 0.5 + 0.2 * (i as f64 * 0.5).sin())
        .collect();
    let data = make_windows(&v, 6).unwrap();
    let base = TrainConfig {
        epochs: 2,
        dropout_rate: 0.0,
        ..TrainConfig::default()
    };
    let (full, _) = train(&spec, &base, &data).unwrap();
    let (same, _) = train(
        &spec,
        &TrainConfig {
            bptt_horizon: Some(6),
            ..base.clone()
        },
        &data,
    )
    .unwrap();
    let (short, _) = train(
        &spec,
        &TrainConfig {
            bptt_horizon: Some(2),
            ..base
        },
        &data,
    )
    .unwrap();
    assert_eq!(full, same);
    assert_ne!(full, short);
}
