#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fxcast::synth::as_series;

pub fn write_pair(dir: &Path, file: &str, pair: &str, values: &[f64]) -> PathBuf {
    let path = dir.join(file);
    let series = as_series(pair, values, 300).unwrap();
    series
        .write_csv(std::fs::File::create(&path).unwrap())
        .unwrap();
    path
}

/// Writes `fxcast.toml` with `sources` (pair, file) and extra TOML lines.
pub fn write_config(dir: &Path, sources: &[(&str, &str)], extra: &str) -> PathBuf {
    let mut text = String::new();
    text.push_str(extra);
    text.push_str("\n[sources]\n");
    for (pair, file) in sources {
        text.push_str(&format!("\"{pair}\" = \"{file}\"\n"));
    }
    let path = dir.join("fxcast.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn fxcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fxcast"))
        .args(args)
        .env_remove("FXCAST_OUT")
        .env_remove("FXCAST_JOBS")
        .output()
        .unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub const QUICK: &str = r#"
profile = "desk"
[models.lstm]
hidden_size = 4
[models.rnn]
hidden_size = 4
[models.bp]
hidden_size = 4
[train]
epochs = 2
"#;
