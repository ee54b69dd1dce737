//! Forecast error metrics and the multi-pair comparison table.
//!
//! MAPE divides by the absolute true value. Metrics are computed in rate
//! units, after mapping predictions back through the scaler.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{FxError, Result};
use crate::models::{Architecture, Model};
use crate::pipeline::{Scaler, WindowedDataset};

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(FxError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(FxError::EmptySample);
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let sq: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sq / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let abs: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(abs / pred.len() as f64)
}

/// Mean of `|pred − truth| / |truth|`, as a fraction (0.1 is 10%).
pub fn mape(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    if let Some(i) = truth.iter().position(|&t| t == 0.0) {
        return Err(FxError::ZeroTruth(i));
    }
    let rel: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs() / t.abs())
        .sum();
    Ok(rel / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub rmse: f64,
    /// Fraction; multiply by 100 for percent.
    pub mape: f64,
    pub n: usize,
}

impl MetricsReport {
    pub fn compute(pred: &[f64], truth: &[f64]) -> Result<Self> {
        Ok(MetricsReport {
            mae: mae(pred, truth)?,
            rmse: rmse(pred, truth)?,
            mape: mape(pred, truth)?,
            n: pred.len(),
        })
    }
}

/// Predictions and truths for a scaled test set, both in rate units.
pub fn predictions(
    model: &Model,
    scaler: &Scaler,
    test: &WindowedDataset,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut pred = Vec::with_capacity(test.len());
    for (x, _) in test.iter() {
        pred.push(scaler.unscale(model.forward(x)?));
    }
    Ok((pred, scaler.unscale_all(test.labels())))
}

/// Metrics on `test` in rate units, with dropout off.
pub fn evaluate(model: &Model, scaler: &Scaler, test: &WindowedDataset) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(FxError::EmptySample);
    }
    let (pred, truth) = predictions(model, scaler, test)?;
    MetricsReport::compute(&pred, &truth)
}

/// One cell group of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorCell {
    Metrics { mae: f64, rmse: f64, mape: f64 },
    Failed,
}

impl From<MetricsReport> for ErrorCell {
    fn from(r: MetricsReport) -> Self {
        ErrorCell::Metrics {
            mae: r.mae,
            rmse: r.rmse,
            mape: r.mape,
        }
    }
}

impl ErrorCell {
    /// MAE and RMSE in units of 1e-3, MAPE in percent, two decimals each.
    pub fn display_values(&self) -> [String; 3] {
        match self {
            ErrorCell::Metrics { mae, rmse, mape } => [
                format!("{:.2}", mae * 1e3),
                format!("{:.2}", rmse * 1e3),
                format!("{:.2}", mape * 1e2),
            ],
            ErrorCell::Failed => std::array::from_fn(|_| "failed".to_string()),
        }
    }
}

/// Rows keyed by currency pair, one [`ErrorCell`] per model.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    models: Vec<Architecture>,
    rows: BTreeMap<String, BTreeMap<Architecture, ErrorCell>>,
}

/// Builds a table from per-pair, per-model results. Every pair must have a
/// cell for every model that appears anywhere in `results`.
pub fn error_table<C: Into<ErrorCell> + Copy>(
    results: &BTreeMap<String, BTreeMap<Architecture, C>>,
) -> Result<ErrorTable> {
    let mut models: Vec<Architecture> = results.values().flat_map(|m| m.keys().copied()).collect();
    models.sort();
    models.dedup();
    let mut missing = Vec::new();
    for (pair, cells) in results {
        for m in &models {
            if !cells.contains_key(m) {
                missing.push(format!("{pair}/{m}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(FxError::IncompleteGrid(missing));
    }
    if models.is_empty() {
        return Err(FxError::IncompleteGrid(vec!["<no results>".into()]));
    }
    let rows = results
        .iter()
        .map(|(p, cells)| {
            (
                p.clone(),
                cells.iter().map(|(m, c)| (*m, (*c).into())).collect(),
            )
        })
        .collect();
    Ok(ErrorTable { models, rows })
}

impl ErrorTable {
    pub fn models(&self) -> &[Architecture] {
        &self.models
    }

    pub fn pairs(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn cell(&self, pair: &str, model: Architecture) -> Option<&ErrorCell> {
        self.rows.get(pair).and_then(|r| r.get(&model))
    }

    pub fn has_failures(&self) -> bool {
        self.rows
            .values()
            .flat_map(|r| r.values())
            .any(|c| *c == ErrorCell::Failed)
    }

    /// Human-readable table grouped as MAE(1e-3) | RMSE(1e-3) | MAPE(%),
    /// each group with one column per model.
    pub fn render_text(&self) -> String {
        let k = self.models.len();
        let label_w = self.rows.keys().map(|p| p.len()).max().unwrap_or(0).max(11);
        let col_w = 8;
        let group_w = col_w * k;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<label_w$}  {:<group_w$}{:<group_w$}{:<group_w$}",
            "error index", "MAE(1e-3)", "RMSE(1e-3)", "MAPE(%)"
        );
        let _ = write!(s, "{:<label_w$}  ", "model");
        for _ in 0..3 {
            for m in &self.models {
                let _ = write!(s, "{:<col_w$}", m.to_string());
            }
        }
        s = s.trim_end().to_string();
        s.push('\n');
        for (pair, cells) in &self.rows {
            let vals: Vec<[String; 3]> = self
                .models
                .iter()
                .map(|m| cells[m].display_values())
                .collect();
            let mut line = format!("{pair:<label_w$}  ");
            for metric in 0..3 {
                for v in &vals {
                    let _ = write!(line, "{:<col_w$}", v[metric]);
                }
            }
            s.push_str(line.trim_end());
            s.push('\n');
        }
        s
    }

    /// `pair,model,mae,rmse,mape` with raw values (rate units, MAPE as a
    /// fraction) at full precision; failed cells hold `failed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| FxError::Io(e.to_string());
        w.write_record(["pair", "model", "mae", "rmse", "mape"])
            .map_err(io)?;
        for (pair, cells) in &self.rows {
            for m in &self.models {
                let vals = match cells[m] {
                    ErrorCell::Metrics { mae, rmse, mape } => {
                        [mae.to_string(), rmse.to_string(), mape.to_string()]
                    }
                    ErrorCell::Failed => std::array::from_fn(|_| "failed".to_string()),
                };
                w.write_record([pair.as_str(), m.slug(), &vals[0], &vals[1], &vals[2]])
                    .map_err(io)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<ErrorTable> {
        let mut r = csv::Reader::from_reader(input);
        let mut results: BTreeMap<String, BTreeMap<Architecture, ErrorCell>> = BTreeMap::new();
        for (i, rec) in r.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| FxError::Parse {
                line,
                message: e.to_string(),
            })?;
            if rec.len() != 5 {
                return Err(FxError::Parse {
                    line,
                    message: format!("expected 5 fields, got {}", rec.len()),
                });
            }
            let model: Architecture = rec[1].parse()?;
            let cell = if &rec[2] == "failed" {
                ErrorCell::Failed
            } else {
                let num = |s: &str| {
                    s.parse::<f64>().map_err(|_| FxError::Parse {
                        line,
                        message: format!("bad number '{s}'"),
                    })
                };
                ErrorCell::Metrics {
                    mae: num(&rec[2])?,
                    rmse: num(&rec[3])?,
                    mape: num(&rec[4])?,
                }
            };
            results
                .entry(rec[0].to_string())
                .or_default()
                .insert(model, cell);
        }
        error_table(&results)
    }
}
