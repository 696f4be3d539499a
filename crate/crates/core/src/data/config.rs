use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::train::Backend;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    Chronological,
    RandomDays,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// `day,slot,y_kw,<weather...>`; lag features are built on load.
    #[default]
    Raw,
    /// `day,slot,<features...>,y_kw`.
    Featured,
}

/// Batch run configuration, read from TOML. Relative paths are resolved
/// against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fleet: Option<PathBuf>,
    /// Input CSV; synthetic data is generated when absent.
    pub data: Option<PathBuf>,
    pub data_format: DataFormat,
    pub beta: f64,
    pub backend: Backend,
    pub seed: u64,
    pub test_fraction: f64,
    pub split: SplitMode,
    pub days: usize,
    pub slots_per_day: usize,
    pub noise_scale: f64,
    pub k_neighbors: usize,
    pub sweep_betas: Vec<f64>,
    /// Realization (kW) at which the surface plot is sampled; defaults to
    /// half the DA capacity.
    pub plot_y: Option<f64>,
    pub plot_points: usize,
    pub profile_days: usize,
    pub subgradient_iterations: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fleet: None,
            data: None,
            data_format: DataFormat::Raw,
            beta: 0.5,
            backend: Backend::ExactLp,
            seed: 7,
            test_fraction: 0.2,
            split: SplitMode::Chronological,
            days: 300,
            slots_per_day: 24,
            noise_scale: 1.0,
            k_neighbors: 200,
            sweep_betas: vec![0.3, 0.5, 0.7],
            plot_y: None,
            plot_points: 201,
            profile_days: 6,
            subgradient_iterations: 5000,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.fleet, &mut cfg.data].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        if !beta_ok(self.beta) {
            return Err(ConfigError::Invalid(format!("beta {} must lie in [0, 1)", self.beta)));
        }
        if let Some(b) = self.sweep_betas.iter().find(|b| !beta_ok(**b)) {
            return Err(ConfigError::Invalid(format!("sweep beta {b} must lie in [0, 1)")));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(ConfigError::Invalid(format!("test_fraction {} must lie in (0, 1)", self.test_fraction)));
        }
        if self.k_neighbors == 0 {
            return Err(ConfigError::Invalid("k_neighbors must be at least 1".into()));
        }
        if self.slots_per_day == 0 || self.days < 10 {
            return Err(ConfigError::Invalid("need slots_per_day >= 1 and days >= 10".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(ConfigError::Invalid("noise_scale must be finite and nonnegative".into()));
        }
        if self.subgradient_iterations == 0 {
            return Err(ConfigError::Invalid("subgradient_iterations must be at least 1".into()));
        }
        Ok(())
    }
}
