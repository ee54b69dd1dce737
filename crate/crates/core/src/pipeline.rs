//! Min-max scaling and sliding-window sample construction.

use serde::{Deserialize, Serialize};

use crate::error::{FxError, Result};
use crate::numkit::{Matrix, Vector};

/// Affine map of a series onto `[0, 1]` using its extrema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    x_min: f64,
    x_max: f64,
}

impl Scaler {
    pub fn new(x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(FxError::InvalidSeries(format!(
                "scaler bounds must be finite, got [{x_min}, {x_max}]"
            )));
        }
        if x_max <= x_min {
            return Err(FxError::DegenerateScaler(x_min));
        }
        Ok(Scaler { x_min, x_max })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    #[inline]
    pub fn scale(&self, x: f64) -> f64 {
        (x - self.x_min) / (self.x_max - self.x_min)
    }

    #[inline]
    pub fn unscale(&self, y: f64) -> f64 {
        y * (self.x_max - self.x_min) + self.x_min
    }

    pub fn scale_all(&self, xs: &[f64]) -> Vector {
        xs.iter().map(|&x| self.scale(x)).collect()
    }

    pub fn unscale_all(&self, ys: &[f64]) -> Vector {
        ys.iter().map(|&y| self.unscale(y)).collect()
    }
}

pub fn fit_scaler(values: &[f64]) -> Result<Scaler> {
    if values.is_empty() {
        return Err(FxError::SeriesTooShort {
            required: 1,
            actual: 0,
        });
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    Scaler::new(lo, hi)
}

pub fn scale(s: &Scaler, x: f64) -> f64 {
    s.scale(x)
}

pub fn unscale(s: &Scaler, y: f64) -> f64 {
    s.unscale(y)
}

/// Which portion of a series the scaler's extrema are taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerScope {
    /// Fit on the training split only; the test split is windowed separately.
    #[default]
    TrainOnly,
    /// Fit on every time point, window the whole series, then split samples.
    FullSeries,
}

/// Feature windows of `window_len` consecutive values with the next value as
/// label.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    window_len: usize,
    features: Matrix,
    labels: Vector,
    origin_index: Vec<usize>,
}

impl WindowedDataset {
    pub fn new(
        window_len: usize,
        features: Matrix,
        labels: Vector,
        origin_index: Vec<usize>,
    ) -> Result<Self> {
        if features.cols() != window_len
            || features.rows() != labels.len()
            || labels.len() != origin_index.len()
        {
            return Err(FxError::Dimension {
                op: "WindowedDataset::new",
                left: features.shape(),
                right: (labels.len(), window_len),
            });
        }
        Ok(WindowedDataset {
            window_len,
            features,
            labels,
            origin_index,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// Index of each sample's label in the series the windows came from.
    pub fn origin_index(&self) -> &[usize] {
        &self.origin_index
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.feature(i), self.labels[i]))
    }

    /// Samples `range` as a new dataset, in order.
    pub fn slice(&self, range: std::ops::Range<usize>) -> WindowedDataset {
        let w = self.window_len;
        let data = self.features.as_slice()[range.start * w..range.end * w].to_vec();
        WindowedDataset {
            window_len: w,
            features: Matrix::from_vec(range.len(), w, data).expect("slice shape"),
            labels: self.labels[range.clone()].to_vec(),
            origin_index: self.origin_index[range].to_vec(),
        }
    }
}

/// Stride-1 windows over `values`.
pub fn make_windows(values: &[f64], window_len: usize) -> Result<WindowedDataset> {
    make_windows_at(values, window_len, 0)
}

/// As [`make_windows`], with `origin_index` offset by `offset` so it points
/// into a longer parent series.
pub fn make_windows_at(
    values: &[f64],
    window_len: usize,
    offset: usize,
) -> Result<WindowedDataset> {
    if window_len == 0 {
        return Err(FxError::Config("window length must be at least 1".into()));
    }
    if values.len() < window_len + 1 {
        return Err(FxError::SeriesTooShort {
            required: window_len + 1,
            actual: values.len(),
        });
    }
    let n = values.len() - window_len;
    let mut data = Vec::with_capacity(n * window_len);
    for w in values.windows(window_len).take(n) {
        data.extend_from_slice(w);
    }
    let labels = values[window_len..].to_vec();
    let origin = (0..n).map(|i| offset + i + window_len).collect();
    WindowedDataset::new(
        window_len,
        Matrix::from_vec(n, window_len, data)?,
        labels,
        origin,
    )
}

/// Number of leading items assigned to the training side.
pub fn split_point(n: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(FxError::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let cut = (n as f64 * train_fraction).floor() as usize;
    if cut == 0 {
        return Err(FxError::EmptySplit {
            n,
            fraction: train_fraction,
            side: "train",
        });
    }
    if cut >= n {
        return Err(FxError::EmptySplit {
            n,
            fraction: train_fraction,
            side: "test",
        });
    }
    Ok(cut)
}

/// Scaled train/test datasets ready for fitting, with the scaler that made them.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub scaler: Scaler,
    pub train: WindowedDataset,
    pub test: WindowedDataset,
}

/// Split, scale and window a raw close series according to `scope`.
pub fn prepare(
    values: &[f64],
    window_len: usize,
    train_fraction: f64,
    scope: ScalerScope,
) -> Result<PreparedData> {
    match scope {
        ScalerScope::TrainOnly => {
            let cut = split_point(values.len(), train_fraction)?;
            let (train_raw, test_raw) = values.split_at(cut);
            let scaler = fit_scaler(train_raw)?;
            let train = make_windows_at(&scaler.scale_all(train_raw), window_len, 0)?;
            let test = make_windows_at(&scaler.scale_all(test_raw), window_len, cut)?;
            Ok(PreparedData {
                scaler,
                train,
                test,
            })
        }
        ScalerScope::FullSeries => {
            let scaler = fit_scaler(values)?;
            let all = make_windows(&scaler.scale_all(values), window_len)?;
            let (train, test) = crate::dataio::chronological_split(&all, train_fraction)?;
            Ok(PreparedData {
                scaler,
                train,
                test,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fit_scaler_examples() {
        let s = fit_scaler(&[1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.x_min(), s.x_max()), (1.0, 3.0));
        assert_eq!(
            fit_scaler(&[5.0, 5.0, 5.0]).unwrap_err(),
            FxError::DegenerateScaler(5.0)
        );
        assert!(fit_scaler(&[]).is_err());
    }

    #[test]
    fn scale_examples() {
        let s = Scaler::new(1.0, 3.0).unwrap();
        assert_eq!(s.scale(2.0), 0.5);
        assert_eq!(s.scale(1.0), 0.0);
        assert_eq!(s.scale(3.0), 1.0);
        assert_eq!(s.unscale(0.5), 2.0);
        assert_eq!(s.unscale(0.0), 1.0);
        // outside the fitted range is allowed
        assert_eq!(s.scale(4.0), 1.5);

        let aud = Scaler::new(0.705, 0.772).unwrap();
        let expected = (0.746 - 0.705) / (0.772 - 0.705);
        assert!((aud.scale(0.746) - expected).abs() < 1e-15);
        assert!((aud.scale(0.746) - 0.61194).abs() < 1e-5);
    }

    #[test]
    fn window_examples() {
        let v: Vec<f64> = (1..=12).map(f64::from).collect();
        let ds = make_windows(&v, 10).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.feature(0), &v[0..10]);
        assert_eq!(ds.label(0), 11.0);
        assert_eq!(ds.origin_index(), &[10, 11]);

        let long: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(make_windows(&long, 10).unwrap().len(), 90);

        assert_eq!(
            make_windows(&long[..10], 10).unwrap_err(),
            FxError::SeriesTooShort {
                required: 11,
                actual: 10
            }
        );
    }

    #[test]
    fn prepare_train_only_keeps_splits_apart() {
        let v: Vec<f64> = (0..50).map(|i| 1.0 + (i as f64) * 0.01).collect();
        let p = prepare(&v, 5, 0.8, ScalerScope::TrainOnly).unwrap();
        assert_eq!(p.scaler.x_max(), v[39]);
        assert_eq!(p.train.len(), 35);
        assert_eq!(p.test.len(), 5);
        assert_eq!(p.test.origin_index()[0], 45);
        // test values exceed the training maximum
        assert!(p.test.labels().iter().all(|&y| y > 1.0));

        let f = prepare(&v, 5, 0.8, ScalerScope::FullSeries).unwrap();
        assert_eq!(f.train.len() + f.test.len(), 45);
        assert_eq!(f.train.len(), 36);
    }

    proptest! {
        #[test]
        fn scale_round_trip(x in 0.9f64..1.5, lo in 0.5f64..0.9, width in 0.01f64..1.0) {
            let s = Scaler::new(lo, lo + width).unwrap();
            let back = s.unscale(s.scale(x));
            prop_assert!((back - x).abs() <= 1e-12 * x.abs());
        }

        #[test]
        fn scale_is_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let s = Scaler::new(-1.0, 2.0).unwrap();
            prop_assume!(a < b);
            prop_assert!(s.scale(a) < s.scale(b));
        }

        #[test]
        fn windows_shift_consistently(v in prop::collection::vec(0.0f64..1.0, 3..60), w in 1usize..10) {
            prop_assume!(v.len() > w);
            let ds = make_windows(&v, w).unwrap();
            prop_assert_eq!(ds.len(), v.len() - w);
            for i in 0..ds.len().saturating_sub(1) {
                prop_assert_eq!(ds.label(i), ds.feature(i + 1)[w - 1]);
                prop_assert_eq!(&ds.feature(i)[1..], &ds.feature(i + 1)[..w - 1]);
            }
        }
    }
}
