//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! version = 1
//! profile = "desk"            # or "reproduction" (default)
//! resample_seconds = 300
//! window_len = 10
//! train_fraction = 0.8
//! scaler_scope = "train_only" # or "full_series"
//! architectures = ["lstm", "bp", "rnn"]
//! output_dir = "out"
//!
//! [sources]
//! "AUD/USD" = "data/audusd.csv"
//!
//! [models.lstm]
//! hidden_layers = 1
//! hidden_size = 32
//!
//! [train]
//! learning_rate = 0.01
//! epochs = 50
//! seed = 7
//! ```
//!
//! Relative source paths are resolved against the directory holding the
//! config file. `FXCAST_OUT` overrides `output_dir`; `FXCAST_JOBS` sets the
//! parallelism of `compare`. Nothing else is read from the environment.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use fxcast_core::models::{Architecture, ModelSpec};
use fxcast_core::numkit::ActivationKind;
use fxcast_core::pipeline::ScalerScope;
use fxcast_core::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;
pub const ENV_OUT: &str = "FXCAST_OUT";
pub const ENV_JOBS: &str = "FXCAST_JOBS";

/// Base model shapes before per-architecture overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Reproduction,
    Desk,
}

/// Fields of a [`ModelSpec`] that a config may change for one architecture.
/// Window length, dropout and seed come from the experiment as a whole.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecOverride {
    pub hidden_layers: Option<usize>,
    pub hidden_size: Option<usize>,
    pub input_activation: Option<ActivationKind>,
    pub hidden_activation: Option<ActivationKind>,
    pub output_activation: Option<ActivationKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOverrides {
    pub lstm: SpecOverride,
    pub rnn: SpecOverride,
    #[serde(alias = "mlp")]
    pub bp: SpecOverride,
}

impl ModelOverrides {
    fn get(&self, arch: Architecture) -> &SpecOverride {
        match arch {
            Architecture::Lstm => &self.lstm,
            Architecture::Rnn => &self.rnn,
            Architecture::Bp => &self.bp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Pair label to CSV path, as written in the file.
    pub sources: BTreeMap<String, PathBuf>,
    pub resample_seconds: i64,
    pub window_len: usize,
    pub train_fraction: f64,
    pub scaler_scope: ScalerScope,
    pub profile: Profile,
    pub architectures: Vec<Architecture>,
    pub models: ModelOverrides,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            sources: BTreeMap::new(),
            resample_seconds: 300,
            window_len: 10,
            train_fraction: 0.8,
            scaler_scope: ScalerScope::TrainOnly,
            profile: Profile::Reproduction,
            architectures: Architecture::ALL.to_vec(),
            models: ModelOverrides::default(),
            train: TrainConfig::default(),
            output_dir: PathBuf::from("fxcast-out"),
            base_dir: PathBuf::new(),
        }
    }
}

/// Command-line and environment settings layered over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub allow_lr_outside_paper: bool,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::from_toml_str(&text, &base).map_err(|e| e.context(&path.display().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Applies flags, then `FXCAST_OUT` if no `--out` was given, and validates.
    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(seed) = o.seed {
            self.train.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        } else if let Some(env) = std::env::var_os(ENV_OUT) {
            self.output_dir = PathBuf::from(env);
        }
        if o.allow_lr_outside_paper {
            self.train.allow_lr_outside_paper = true;
        }
        self.validate()
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.resample_seconds <= 0 {
            return Err(CliError::Config("resample_seconds must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.architectures.is_empty() {
            return Err(CliError::Config("architectures must not be empty".into()));
        }
        let mut paths = BTreeSet::new();
        let mut slugs = BTreeMap::new();
        for (pair, path) in &self.sources {
            if !paths.insert(self.resolve(path)) {
                return Err(CliError::Config(format!(
                    "source path {} is used by more than one pair",
                    path.display()
                )));
            }
            if let Some(other) = slugs.insert(pair_slug(pair), pair) {
                return Err(CliError::Config(format!(
                    "pairs '{other}' and '{pair}' map to the same output directory"
                )));
            }
        }
        self.train.validate()?;
        for arch in Architecture::ALL {
            self.spec_for(arch).validate()?;
        }
        Ok(())
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn source_path(&self, pair: &str) -> Option<PathBuf> {
        self.sources.get(pair).map(|p| self.resolve(p))
    }

    pub fn pairs(&self) -> impl Iterator<Item = &str> {
        self.sources.keys().map(String::as_str)
    }

    /// The effective model for `arch`: profile, then overrides, then the
    /// experiment-wide window, dropout and seed.
    pub fn spec_for(&self, arch: Architecture) -> ModelSpec {
        let mut spec = match self.profile {
            Profile::Reproduction => ModelSpec::reproduction(arch),
            Profile::Desk => ModelSpec::desk(arch),
        };
        let o = self.models.get(arch);
        spec.hidden_layers = o.hidden_layers.unwrap_or(spec.hidden_layers);
        spec.hidden_size = o.hidden_size.unwrap_or(spec.hidden_size);
        spec.input_activation = o.input_activation.unwrap_or(spec.input_activation);
        spec.hidden_activation = o.hidden_activation.unwrap_or(spec.hidden_activation);
        spec.output_activation = o.output_activation.unwrap_or(spec.output_activation);
        spec.window_len = self.window_len;
        spec.dropout_rate = self.train.dropout_rate;
        spec.seed = self.train.seed;
        spec
    }

    /// SHA-256 over every field that can change a result. The output
    /// directory, parallelism and the learning-rate permission flag are left
    /// out; profile and overrides enter through the resolved model specs.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Semantic<'a> {
            version: u32,
            sources: &'a BTreeMap<String, PathBuf>,
            resample_seconds: i64,
            window_len: usize,
            train_fraction: f64,
            scaler_scope: ScalerScope,
            architectures: &'a [Architecture],
            specs: BTreeMap<Architecture, ModelSpec>,
            train: TrainConfig,
        }
        let view = Semantic {
            version: self.version,
            sources: &self.sources,
            resample_seconds: self.resample_seconds,
            window_len: self.window_len,
            train_fraction: self.train_fraction,
            scaler_scope: self.scaler_scope,
            architectures: &self.architectures,
            specs: self
                .architectures
                .iter()
                .map(|&a| (a, self.spec_for(a)))
                .collect(),
            train: TrainConfig {
                allow_lr_outside_paper: false,
                ..self.train.clone()
            },
        };
        let bytes = serde_json::to_vec(&view).expect("config view serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Directory-safe form of a pair label: `AUD/USD` becomes `aud_usd`.
pub fn pair_slug(pair: &str) -> String {
    pair.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

/// `FXCAST_JOBS` if set and valid, else the number of available cores.
pub fn default_jobs() -> usize {
    std::env::var(ENV_JOBS)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(text, Path::new("/cfg")).unwrap()
    }

    #[test]
    fn empty_file_gives_reproduction_defaults() {
        let cfg = parse("");
        assert_eq!(cfg.resample_seconds, 300);
        assert_eq!(cfg.window_len, 10);
        assert_eq!(cfg.train_fraction, 0.8);
        assert_eq!(
            cfg.spec_for(Architecture::Lstm),
            ModelSpec::reproduction(Architecture::Lstm)
        );
        assert_eq!(cfg.train, TrainConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_and_paths() {
        let cfg = parse(
            r#"
            profile = "desk"
            [sources]
            "EUR/USD" = "data/eu.csv"
            "GBP/USD" = "/abs/gb.csv"
            [models.mlp]
            hidden_size = 8
            [train]
            dropout_rate = 0.0
            seed = 9
            "#,
        );
        let bp = cfg.spec_for(Architecture::Bp);
        assert_eq!(bp.hidden_size, 8);
        assert_eq!(bp.hidden_layers, 2);
        assert_eq!(bp.dropout_rate, 0.0);
        assert_eq!(bp.seed, 9);
        assert_eq!(
            cfg.source_path("EUR/USD").unwrap(),
            PathBuf::from("/cfg/data/eu.csv")
        );
        assert_eq!(
            cfg.source_path("GBP/USD").unwrap(),
            PathBuf::from("/abs/gb.csv")
        );
        assert_eq!(cfg.pairs().collect::<Vec<_>>(), ["EUR/USD", "GBP/USD"]);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "version = 2",
            "unknown_key = 1",
            "train_fraction = 1.0",
            "resample_seconds = 0",
            "architectures = []",
            "[train]\nlearning_rate = 0.5",
            "[models.lstm]\nhidden_activation = \"relu\"",
            "[sources]\na = \"x.csv\"\nb = \"x.csv\"",
            "[sources]\n\"A/B\" = \"1.csv\"\n\"a_b\" = \"2.csv\"",
        ] {
            let res =
                ExperimentConfig::from_toml_str(text, Path::new("/")).and_then(|c| c.validate());
            assert!(matches!(res, Err(CliError::Config(_))), "{text}: {res:?}");
        }
    }

    #[test]
    fn lr_flag_lifts_the_bound() {
        let mut cfg = parse("[train]\nlearning_rate = 0.5");
        cfg.apply(&Overrides {
            allow_lr_outside_paper: true,
            out: Some("o".into()),
            ..Default::default()
        })
        .unwrap();
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let base = parse("profile = \"desk\"");
        let h = base.hash();
        assert_eq!(h.len(), 64);

        let mut same = base.clone();
        same.output_dir = "elsewhere".into();
        same.train.allow_lr_outside_paper = true;
        assert_eq!(same.hash(), h);
        // Spelling out a default leaves the effective spec unchanged.
        let explicit = parse("profile = \"desk\"\n[models.lstm]\nhidden_size = 16");
        assert_eq!(explicit.hash(), h);

        let edits: [fn(&mut ExperimentConfig); 10] = [
            |c| c.window_len = 11,
            |c| c.train_fraction = 0.7,
            |c| c.resample_seconds = 60,
            |c| c.scaler_scope = ScalerScope::FullSeries,
            |c| c.train.seed = 1,
            |c| c.train.epochs = 3,
            |c| c.train.learning_rate = 0.02,
            |c| c.models.rnn.hidden_size = Some(3),
            |c| c.architectures = vec![Architecture::Lstm],
            |c| {
                c.sources.insert("X".into(), "x.csv".into());
            },
        ];
        for edit in edits {
            let mut c = base.clone();
            edit(&mut c);
            assert_ne!(c.hash(), h);
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = parse("profile = \"desk\"\n[sources]\nA = \"a.csv\"");
        let back =
            ExperimentConfig::from_toml_str(&cfg.to_toml_string(), Path::new("/cfg")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn slugs() {
        assert_eq!(pair_slug("AUD/USD"), "aud_usd");
        assert_eq!(pair_slug("x-y 1"), "x_y_1");
    }
}
