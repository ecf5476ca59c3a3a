//! Flat JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use mixdiff_core::train::ModelKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read configuration {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Gmm,
    GammaMixture,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KPolicy {
    Fixed,
    Auto,
    Labels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub name: String,
    pub data: DataSource,
    /// Series file for `data = "csv"`, relative to the configuration file.
    pub csv_path: Option<PathBuf>,
    /// Records skipped at the start of the series.
    pub csv_offset: usize,
    pub train_len: usize,
    pub test_len: usize,
    /// Training points drawn from a synthetic law.
    pub n_train: usize,
    /// Size of the synthetic reference sample used for W1.
    pub n_reference: usize,
    pub model: ModelKind,
    pub k_policy: KPolicy,
    pub k: usize,
    pub k_max: usize,
    pub ddpm_steps: usize,
    pub beta_first: f64,
    pub beta_last: f64,
    pub sde_beta0: f64,
    pub sde_beta1: f64,
    pub sde_steps: usize,
    pub final_step_noise: bool,
    pub hidden: Vec<usize>,
    pub train_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub n_generate: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub hist_bins: usize,
    pub reeff_draws: usize,
    pub sigma_ts: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            data: DataSource::Gmm,
            csv_path: None,
            csv_offset: 0,
            train_len: 1280,
            test_len: 640,
            n_train: 256,
            n_reference: 100_000,
            model: ModelKind::MixDdpm,
            k_policy: KPolicy::Fixed,
            k: 2,
            k_max: 10,
            ddpm_steps: 1000,
            beta_first: 0.001,
            beta_last: 0.02,
            sde_beta0: 0.1,
            sde_beta1: 40.0,
            sde_steps: 200,
            final_step_noise: true,
            hidden: vec![128, 128, 128],
            train_steps: 16_000,
            batch_size: 32,
            learning_rate: 1e-3,
            n_generate: 4096,
            seeds: vec![0, 1, 2],
            out_dir: PathBuf::from("out"),
            hist_bins: 60,
            reeff_draws: 100_000,
            sigma_ts: vec![1.0],
        }
    }
}

impl RunConfig {
    /// Every key the configuration accepts.
    pub fn known_keys() -> Vec<String> {
        match serde_json::to_value(RunConfig::default()) {
            Ok(Value::Object(map)) => map.keys().cloned().collect(),
            _ => unreachable!("configuration serializes to an object"),
        }
    }

    /// Parses a JSON object, rejecting unknown keys before anything else.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let map: Map<String, Value> = serde_json::from_str(text)?;
        let known = Self::known_keys();
        let mut unknown: Vec<String> = map.keys().filter(|k| !known.contains(k)).cloned().collect();
        if !unknown.is_empty() {
            unknown.sort();
            return Err(ConfigError::UnknownKeys(unknown));
        }
        let cfg: RunConfig = serde_json::from_value(Value::Object(map))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a file; a relative `csv_path` is resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(csv) = &cfg.csv_path {
            if csv.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.csv_path = Some(base.join(csv));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        if self.seeds.is_empty() {
            problems.push("seeds must not be empty".to_string());
        }
        if self.n_generate == 0 {
            problems.push("n_generate must be positive".into());
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".into());
        }
        if self.k == 0 {
            problems.push("k must be positive".into());
        }
        if self.k_policy == KPolicy::Auto && self.k_max < 2 {
            problems.push("k_max must be at least 2".into());
        }
        if self.hist_bins == 0 {
            problems.push("hist_bins must be positive".into());
        }
        if self.sde_steps == 0 {
            problems.push("sde_steps must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            problems.push("learning_rate must be positive".into());
        }
        if self.reeff_draws < 2 {
            problems.push("reeff_draws must be at least 2".into());
        }
        if self.sigma_ts.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            problems.push("sigma_ts must be nonnegative".into());
        }
        match self.data {
            DataSource::Csv => match &self.csv_path {
                None => problems.push("csv_path is required for csv data".into()),
                Some(p) if !p.exists() => problems.push(format!("csv_path {} does not exist", p.display())),
                Some(_) => {}
            },
            _ if self.n_train == 0 || self.n_reference == 0 => {
                problems.push("n_train and n_reference must be positive".into());
            }
            _ => {}
        }
        if self.data == DataSource::Csv && self.k_policy == KPolicy::Labels {
            problems.push("k_policy labels needs a labeled synthetic source".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems.join("; ")))
        }
    }
}
