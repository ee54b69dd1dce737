use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use fxcast_core::dataio::{
    parse_price_csv, resample_last, summary_stats, write_stats_csv, PriceSeries, StatsRow,
};
use fxcast_core::evalkit::{error_table, evaluate, ErrorCell, ErrorTable, MetricsReport};
use fxcast_core::models::{predict, read_model, write_model, Architecture};
use fxcast_core::pipeline::{prepare, PreparedData};
use fxcast_core::train::{train_with_validation, LossHistory};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{pair_slug, ExperimentConfig};
use crate::error::{CliError, CliResult};

pub const STATS_FILE: &str = "stats.csv";
pub const PLOT_DIR: &str = "plot";
pub const MODEL_FILE: &str = "model.fxm";
pub const LOSS_FILE: &str = "loss.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TABLE_CSV: &str = "error_table.csv";
pub const TABLE_TXT: &str = "error_table.txt";

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Reads and resamples one configured pair.
pub fn load_series(cfg: &ExperimentConfig, pair: &str) -> CliResult<PriceSeries> {
    let path = cfg
        .source_path(pair)
        .ok_or_else(|| CliError::Usage(format!("pair '{pair}' is not configured")))?;
    let file =
        File::open(&path).map_err(|e| CliError::Io(format!("{pair}: {}: {e}", path.display())))?;
    let raw =
        parse_price_csv(BufReader::new(file), pair).map_err(|e| CliError::from(e).context(pair))?;
    resample_last(&raw, cfg.resample_seconds).map_err(|e| CliError::from(e).context(pair))
}

fn load_prepared(cfg: &ExperimentConfig, pair: &str) -> CliResult<PreparedData> {
    let series = load_series(cfg, pair)?;
    prepare(
        series.closes(),
        cfg.window_len,
        cfg.train_fraction,
        cfg.scaler_scope,
    )
    .map_err(|e| CliError::from(e).context(pair))
}

/// Summary statistics per pair in lexicographic order. Writes `stats.csv`
/// and one `plot/<pair>.csv` of resampled `timestamp,close` per pair.
pub fn cmd_stats(cfg: &ExperimentConfig) -> CliResult<Vec<(String, StatsRow)>> {
    if cfg.sources.is_empty() {
        return Err(CliError::Config("no data sources configured".into()));
    }
    let mut rows = Vec::new();
    for pair in cfg.pairs() {
        let series = load_series(cfg, pair)?;
        let stats = summary_stats(&series).map_err(|e| CliError::from(e).context(pair))?;
        let plot = cfg
            .output_dir
            .join(PLOT_DIR)
            .join(format!("{}.csv", pair_slug(pair)));
        series.write_csv(create(&plot)?)?;
        rows.push((pair.to_string(), stats));
    }
    write_stats_csv(&rows, create(&cfg.output_dir.join(STATS_FILE))?)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub samples: usize,
}

impl From<MetricsReport> for MetricsSummary {
    fn from(r: MetricsReport) -> Self {
        MetricsSummary {
            mae: r.mae,
            rmse: r.rmse,
            mape: r.mape,
            samples: r.n,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainManifest {
    pub pair: String,
    pub architecture: Architecture,
    pub config_hash: String,
    pub seed: u64,
    pub epochs: usize,
    pub num_params: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub final_train_mse: Option<f64>,
    pub test: MetricsSummary,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub dir: PathBuf,
    pub manifest: TrainManifest,
    pub history: LossHistory,
}

/// Output directory of one (pair, architecture) training run.
pub fn run_dir(cfg: &ExperimentConfig, pair: &str, arch: Architecture) -> PathBuf {
    cfg.output_dir.join(pair_slug(pair)).join(arch.slug())
}

fn resolve_pair<'a>(cfg: &'a ExperimentConfig, pair: Option<&'a str>) -> CliResult<&'a str> {
    match pair {
        Some(p) if cfg.sources.contains_key(p) => Ok(p),
        Some(p) => Err(CliError::Usage(format!(
            "pair '{p}' is not configured (have: {})",
            cfg.pairs().collect::<Vec<_>>().join(", ")
        ))),
        None => match cfg.sources.len() {
            0 => Err(CliError::Config("no data sources configured".into())),
            1 => Ok(cfg.pairs().next().unwrap()),
            _ => Err(CliError::Usage(
                "several pairs configured; choose one with --pair".into(),
            )),
        },
    }
}

/// Trains one model, evaluates it on the test split and writes `model.fxm`,
/// `loss.csv` and `manifest.json` under `<out>/<pair>/<arch>/`.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    arch: Architecture,
    pair: Option<&str>,
) -> CliResult<TrainOutcome> {
    let pair = resolve_pair(cfg, pair)?;
    let data = load_prepared(cfg, pair)?;
    let spec = cfg.spec_for(arch);
    let (model, history) = train_with_validation(&spec, &cfg.train, &data.train, Some(&data.test))
        .map_err(|e| CliError::from(e).context(pair))?;
    let metrics =
        evaluate(&model, &data.scaler, &data.test).map_err(|e| CliError::from(e).context(pair))?;

    let dir = run_dir(cfg, pair, arch);
    let mut out = create(&dir.join(MODEL_FILE))?;
    write_model(&model, &data.scaler, &mut out)?;
    out.flush()?;
    history.write_csv(create(&dir.join(LOSS_FILE))?)?;

    let manifest = TrainManifest {
        pair: pair.to_string(),
        architecture: arch,
        config_hash: cfg.hash(),
        seed: cfg.train.seed,
        epochs: cfg.train.epochs,
        num_params: model.params.num_params(),
        train_samples: data.train.len(),
        test_samples: data.test.len(),
        final_train_mse: history.train_mse.last().copied(),
        test: metrics.into(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(TrainOutcome {
        dir,
        manifest,
        history,
    })
}

#[derive(Debug, Clone, Serialize)]
struct CompareManifest<'a> {
    config_hash: String,
    seed: u64,
    cells: Vec<CellRecord<'a>>,
}

#[derive(Debug, Clone, Serialize)]
struct CellRecord<'a> {
    pair: &'a str,
    architecture: Architecture,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<MetricsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub table: ErrorTable,
    /// `pair/MODEL: reason` for every cell that did not produce metrics.
    pub failures: Vec<String>,
}

/// Trains and evaluates every (pair, architecture) cell on up to `jobs`
/// threads, then writes `error_table.csv`, `error_table.txt` and
/// `manifest.json`. Failed cells are marked in the table rather than
/// aborting the run.
pub fn cmd_compare(cfg: &ExperimentConfig, jobs: usize) -> CliResult<CompareOutcome> {
    if cfg.sources.is_empty() {
        return Err(CliError::Config("no data sources configured".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;

    let pairs: Vec<&str> = cfg.pairs().collect();
    let results: Vec<(&str, Architecture, CliResult<MetricsReport>)> = pool.install(|| {
        let data: Vec<CliResult<PreparedData>> =
            pairs.par_iter().map(|p| load_prepared(cfg, p)).collect();
        let cells: Vec<(usize, Architecture)> = (0..pairs.len())
            .flat_map(|i| cfg.architectures.iter().map(move |&a| (i, a)))
            .collect();
        cells
            .par_iter()
            .map(|&(i, arch)| {
                let res = match &data[i] {
                    Ok(d) => train_cell(cfg, arch, d).map_err(|e| e.context(pairs[i])),
                    Err(e) => Err(CliError::Data(e.to_string())),
                };
                (pairs[i], arch, res)
            })
            .collect()
    });

    let mut grid: BTreeMap<String, BTreeMap<Architecture, ErrorCell>> = BTreeMap::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (pair, arch, res) in results {
        let (cell, record) = match res {
            Ok(m) => (
                ErrorCell::from(m),
                CellRecord {
                    pair,
                    architecture: arch,
                    metrics: Some(m.into()),
                    error: None,
                },
            ),
            Err(e) => {
                failures.push(format!("{pair}/{arch}: {e}"));
                (
                    ErrorCell::Failed,
                    CellRecord {
                        pair,
                        architecture: arch,
                        metrics: None,
                        error: Some(e.to_string()),
                    },
                )
            }
        };
        grid.entry(pair.to_string()).or_default().insert(arch, cell);
        records.push(record);
    }
    let table = error_table(&grid)?;

    let mut csv = create(&cfg.output_dir.join(TABLE_CSV))?;
    table.write_csv(&mut csv)?;
    csv.flush()?;
    let mut txt = create(&cfg.output_dir.join(TABLE_TXT))?;
    txt.write_all(table.render_text().as_bytes())?;
    txt.flush()?;
    write_json(
        &cfg.output_dir.join(MANIFEST_FILE),
        &CompareManifest {
            config_hash: cfg.hash(),
            seed: cfg.train.seed,
            cells: records,
        },
    )?;
    Ok(CompareOutcome { table, failures })
}

fn train_cell(
    cfg: &ExperimentConfig,
    arch: Architecture,
    data: &PreparedData,
) -> CliResult<MetricsReport> {
    let (model, _) = train_with_validation(&cfg.spec_for(arch), &cfg.train, &data.train, None)?;
    Ok(evaluate(&model, &data.scaler, &data.test)?)
}

/// Next-step rate from a saved model and a window of raw prices.
pub fn cmd_predict(model_path: &Path, window: &[f64]) -> CliResult<f64> {
    let file = File::open(model_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", model_path.display())))?;
    let (model, scaler) = read_model(BufReader::new(file))
        .map_err(|e| CliError::from(e).context(&model_path.display().to_string()))?;
    let expected = model.spec.window_len;
    if window.len() != expected {
        return Err(CliError::Usage(format!(
            "window has {} values but the model expects {expected}",
            window.len()
        )));
    }
    Ok(predict(&model, &scaler, window)?)
}
