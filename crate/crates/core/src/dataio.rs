//! Close-price ingestion, fixed-interval resampling, descriptive statistics
//! and the chronological train/test split.

use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{FxError, Result};
use crate::pipeline::{split_point, WindowedDataset};

/// Timestamped close prices for one currency pair.
///
/// Timestamps are UTC epoch seconds, strictly increasing; closes are positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pair: String,
    timestamps: Vec<i64>,
    closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(pair: impl Into<String>, timestamps: Vec<i64>, closes: Vec<f64>) -> Result<Self> {
        if timestamps.len() != closes.len() {
            return Err(FxError::InvalidSeries(format!(
                "{} timestamps but {} closes",
                timestamps.len(),
                closes.len()
            )));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FxError::InvalidSeries(format!(
                "timestamps not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(&c) = closes.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(FxError::InvalidSeries(format!("close {c} is not positive")));
        }
        Ok(PriceSeries {
            pair: pair.into(),
            timestamps,
            closes,
        })
    }

    pub fn pair(&self) -> &str {
        &self.pair
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    /// Writes `timestamp,close` CSV in the same format [`parse_price_csv`] reads.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "close"]).map_err(csv_io)?;
        for (&t, &c) in self.timestamps.iter().zip(&self.closes) {
            w.write_record([format_timestamp(t), format!("{c}")])
                .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> FxError {
    FxError::Io(e.to_string())
}

pub fn format_timestamp(epoch: i64) -> String {
    DateTime::<Utc>::from_timestamp(epoch, 0)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| epoch.to_string())
}

fn parse_timestamp(s: &str) -> std::result::Result<i64, String> {
    if !s.ends_with('Z') {
        return Err(format!("timestamp '{s}' must be UTC with a 'Z' suffix"));
    }
    DateTime::parse_from_rfc3339(s)
        .map(|d| d.timestamp())
        .map_err(|e| format!("bad timestamp '{s}': {e}"))
}

/// Reads `timestamp,close` CSV. Rows may arrive in any order; the result is
/// sorted, and a repeated timestamp is an error.
pub fn parse_price_csv<R: Read>(source: R, pair: &str) -> Result<PriceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| FxError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "close" {
        return Err(FxError::Parse {
            line: 1,
            message: format!(
                "expected header 'timestamp,close', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    // (timestamp, close, line)
    let mut rows: Vec<(i64, f64, u64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| FxError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(FxError::Parse {
                line,
                message: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let ts = parse_timestamp(&record[0]).map_err(|message| FxError::Parse { line, message })?;
        let close: f64 = record[1].parse().map_err(|_| FxError::Parse {
            line,
            message: format!("bad close '{}'", &record[1]),
        })?;
        if !(close.is_finite() && close > 0.0) {
            return Err(FxError::NonPositiveClose { line, value: close });
        }
        rows.push((ts, close, line));
    }
    if rows.is_empty() {
        return Err(FxError::NoDataRows);
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(FxError::DuplicateTimestamp {
            line: w[0].2.max(w[1].2),
            timestamp: format_timestamp(w[1].0),
        });
    }
    let (timestamps, closes) = rows.into_iter().map(|(t, c, _)| (t, c)).unzip();
    PriceSeries::new(pair, timestamps, closes)
}

/// Keeps the last close of every non-empty bucket.
///
/// Buckets are right-closed, `(k·b − b, k·b]`, and labelled by their end
/// `k·b`. An observation stamped exactly on a boundary closes that bucket, so
/// grid-aligned input passes through unchanged and resampling is idempotent.
/// Empty buckets are skipped, not filled.
pub fn resample_last(series: &PriceSeries, bucket_seconds: i64) -> Result<PriceSeries> {
    if bucket_seconds < 1 {
        return Err(FxError::Config(format!(
            "bucket must be at least 1 second, got {bucket_seconds}"
        )));
    }
    if series.is_empty() {
        return Err(FxError::NoDataRows);
    }
    let mut timestamps: Vec<i64> = Vec::new();
    let mut closes: Vec<f64> = Vec::new();
    for (&t, &c) in series.timestamps.iter().zip(&series.closes) {
        let end = bucket_end(t, bucket_seconds);
        match timestamps.last() {
            Some(&last) if last == end => *closes.last_mut().unwrap() = c,
            _ => {
                timestamps.push(end);
                closes.push(c);
            }
        }
    }
    PriceSeries::new(series.pair.clone(), timestamps, closes)
}

fn bucket_end(t: i64, b: i64) -> i64 {
    // ceil(t / b) · b for any sign of t
    let q = t.div_euclid(b);
    if t.rem_euclid(b) == 0 {
        q * b
    } else {
        (q + 1) * b
    }
}

/// Descriptive statistics of a close series, in rate units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between order statistics at rank
/// `q·(n−1)`. `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summary_stats(series: &PriceSeries) -> Result<StatsRow> {
    stats_of(series.closes())
}

pub fn stats_of(values: &[f64]) -> Result<StatsRow> {
    if values.is_empty() {
        return Err(FxError::NoDataRows);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(StatsRow {
        mean,
        std: var.sqrt(),
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        q2: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Writes `pair,mean,std,min,q1,q2,q3,max` with six decimals.
pub fn write_stats_csv<W: Write>(rows: &[(String, StatsRow)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pair", "mean", "std", "min", "q1", "q2", "q3", "max"])
        .map_err(csv_io)?;
    for (pair, s) in rows {
        let mut rec = vec![pair.clone()];
        rec.extend(
            [s.mean, s.std, s.min, s.q1, s.q2, s.q3, s.max]
                .iter()
                .map(|v| format!("{v:.6}")),
        );
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// First `⌊n·train_fraction⌋` samples train, the rest test. No shuffling.
pub fn chronological_split(
    dataset: &WindowedDataset,
    train_fraction: f64,
) -> Result<(WindowedDataset, WindowedDataset)> {
    let n = dataset.len();
    let cut = split_point(n, train_fraction)?;
    Ok((dataset.slice(0..cut), dataset.slice(cut..n)))
}
