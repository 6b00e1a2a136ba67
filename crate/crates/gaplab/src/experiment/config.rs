//! Pipeline configuration: a small TOML file with presets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

/// Paper-protocol presets filling any keys the file leaves unset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 16-bit protocol: beta = 150, 200000 sweeps, thin 5, 2500 equilibration.
    Small,
    /// 150-bit protocol: beta = 300, 100000 sweeps, thin 5, 2500 equilibration.
    Large,
}

#[derive(Debug, Clone, Deserialize)]
struct RawConfig {
    n: usize,
    master_seed: u64,
    preset: Option<Preset>,
    beta: Option<f64>,
    s_grid: Option<String>,
    sweeps: Option<usize>,
    thin: Option<usize>,
    equil: Option<usize>,
    workers: Option<usize>,
    coeff_threshold: Option<f64>,
    coeff_max_tries: Option<usize>,
    refine: Option<bool>,
}

/// Fully resolved pipeline settings.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub n: usize,
    pub master_seed: u64,
    pub beta: f64,
    pub s_grid: Vec<f64>,
    pub sweeps: usize,
    pub thin: usize,
    pub equil: usize,
    /// Worker-pool size; an execution detail, so it never reaches the
    /// manifest: artifacts must be byte-identical for any worker count.
    #[serde(skip_serializing)]
    pub workers: usize,
    pub coeff_threshold: Option<f64>,
    pub coeff_max_tries: usize,
    /// Re-run a 0.01-step window around a detected sign change.
    pub refine: bool,
}

pub fn parse_s_grid(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(ConfigError::Invalid(format!(
            "s_grid must be start:stop:step, got '{spec}'"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| ConfigError::Invalid(format!("bad number '{p}' in s_grid")))
        })
        .collect::<Result<_, _>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || stop < start {
        return Err(ConfigError::Invalid("s_grid needs step > 0 and stop >= start".into()));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=count).map(|k| start + k as f64 * step).collect();
    if grid.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
        return Err(ConfigError::Invalid("s_grid values must lie in [0, 1]".into()));
    }
    Ok(grid)
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        if raw.n < 3 {
            return Err(ConfigError::Invalid("n must be at least 3".into()));
        }
        let (beta_d, sweeps_d, thin_d, equil_d) = match raw.preset {
            Some(Preset::Large) => (300.0, 100_000, 5, 2500),
            Some(Preset::Small) | None => (150.0, 200_000, 5, 2500),
        };
        let thin = raw.thin.unwrap_or(thin_d);
        let sweeps = raw.sweeps.unwrap_or(sweeps_d);
        let equil = raw.equil.unwrap_or(equil_d);
        if thin == 0 {
            return Err(ConfigError::Invalid("thin must be >= 1".into()));
        }
        if sweeps / thin <= equil {
            return Err(ConfigError::Invalid(
                "sweeps/thin must exceed equil or no samples survive".into(),
            ));
        }
        Ok(PipelineConfig {
            n: raw.n,
            master_seed: raw.master_seed,
            beta: raw.beta.unwrap_or(beta_d),
            s_grid: parse_s_grid(raw.s_grid.as_deref().unwrap_or("0.05:0.95:0.05"))?,
            sweeps,
            thin,
            equil,
            workers: raw.workers.unwrap_or_else(default_workers),
            coeff_threshold: raw.coeff_threshold,
            coeff_max_tries: raw.coeff_max_tries.unwrap_or(1_000_000),
            refine: raw.refine.unwrap_or(true),
        })
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
