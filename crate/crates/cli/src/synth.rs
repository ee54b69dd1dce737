//! Seeded synthetic price series for smoke runs and acceptance checks.

use std::f64::consts::PI;

use fxcast_core::dataio::PriceSeries;
use fxcast_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// First timestamp of generated series: 2017-01-04T00:00:00Z.
pub const START_EPOCH: i64 = 1_483_488_000;

/// `1 + 0.1·sin(2πt/50) + N(0, sigma²)`.
pub fn noisy_sine(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    (0..n)
        .map(|t| 1.0 + 0.1 * (2.0 * PI * t as f64 / 50.0).sin() + noise.sample(&mut rng))
        .collect()
}

/// Seasonal autoregression `y_t = 0.3·y_{t−1} + 0.6·y_{t−20} + N(0, 0.01²)`
/// around a level of 1, after a 200-step burn-in from zero.
pub fn seasonal_ar(n: usize, seed: u64) -> Vec<f64> {
    const BURN_IN: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).expect("finite sigma");
    let mut y = vec![0.0; n + BURN_IN];
    for t in 20..y.len() {
        y[t] = 0.3 * y[t - 1] + 0.6 * y[t - 20] + noise.sample(&mut rng);
    }
    y[BURN_IN..].iter().map(|v| 1.0 + v).collect()
}

/// Wraps `values` as a series sampled every `step` seconds from [`START_EPOCH`].
pub fn as_series(pair: &str, values: &[f64], step: i64) -> Result<PriceSeries> {
    let ts = (0..values.len() as i64)
        .map(|i| START_EPOCH + (i + 1) * step)
        .collect();
    PriceSeries::new(pair, ts, values.to_vec())
}
