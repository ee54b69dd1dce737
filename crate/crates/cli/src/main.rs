use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fxcast::config::default_jobs;
use fxcast::{
    cmd_compare, cmd_predict, cmd_stats, cmd_train, exit, CliError, CliResult, ExperimentConfig,
    Overrides,
};
use fxcast_core::models::Architecture;

#[derive(Parser)]
#[command(
    name = "fxcast",
    version,
    about = "Exchange-rate forecasting with LSTM, RNN and BP networks"
)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for initialization, shuffling and dropout.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides FXCAST_OUT and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallel training jobs for `compare`; overrides FXCAST_JOBS.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Accept learning rates above 0.1.
    #[arg(long, global = true)]
    allow_lr_outside_paper: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summary statistics and plot data for every configured pair.
    Stats,
    /// Train one model on one pair.
    Train {
        #[arg(long)]
        arch: Architecture,
        #[arg(long)]
        pair: Option<String>,
    },
    /// Train every architecture on every pair and tabulate test errors.
    Compare,
    /// Predict the next rate from a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Raw prices, oldest first, comma-separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        window: Vec<f64>,
    },
}

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        allow_lr_outside_paper: cli.allow_lr_outside_paper,
    })?;
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Stats => {
            let cfg = load_config(cli)?;
            let rows = cmd_stats(&cfg)?;
            let mut out = Vec::new();
            fxcast_core::dataio::write_stats_csv(&rows, &mut out)?;
            print!("{}", String::from_utf8_lossy(&out));
        }
        Command::Train { arch, pair } => {
            let cfg = load_config(cli)?;
            let res = cmd_train(&cfg, *arch, pair.as_deref())?;
            let m = &res.manifest.test;
            println!(
                "{} {}: MAE {} RMSE {} MAPE {} ({} test samples)",
                res.manifest.pair, res.manifest.architecture, m.mae, m.rmse, m.mape, m.samples
            );
            println!("{}", res.dir.display());
        }
        Command::Compare => {
            let cfg = load_config(cli)?;
            let res = cmd_compare(&cfg, cli.jobs.unwrap_or_else(default_jobs))?;
            print!("{}", res.table.render_text());
            if !res.failures.is_empty() {
                for f in &res.failures {
                    eprintln!("failed: {f}");
                }
                return Ok(exit::PARTIAL);
            }
        }
        Command::Predict { model, window } => {
            println!("{}", cmd_predict(model, window)?);
        }
    }
    Ok(exit::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("fxcast: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
