use rand::Rng;

use crate::numkit::Vector;

/// Whether stochastic regularization is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1/(1−rate)`. A zero rate gives all ones and draws nothing from `rng`.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vector {
    if rate <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect()
}

/// Inverted dropout on `h`. Identity in [`Phase::Eval`] or when `rate` is 0.
pub fn apply_dropout<R: Rng + ?Sized>(h: &[f64], rate: f64, phase: Phase, rng: &mut R) -> Vector {
    if phase == Phase::Eval || rate <= 0.0 {
        return h.to_vec();
    }
    let mask = dropout_mask(h.len(), rate, rng);
    h.iter().zip(&mask).map(|(a, m)| a * m).collect()
}

/// Per-sample dropout masks for the outputs passed between stacked layers.
#[derive(Debug, Clone)]
pub enum DropoutMasks {
    /// `[layer][t]`, one entry per recurrent layer below the top.
    Recurrent(Vec<Vec<Vector>>),
    /// One entry per dense hidden layer that feeds another hidden layer.
    Dense(Vec<Vector>),
}
