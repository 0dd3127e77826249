//! Resolved run parameters.
//!
//! A command's parameters come from its defaults, or from a `--config` TOML
//! file that must list every field, with explicit flags layered on top.

use std::path::{Path, PathBuf};

use dipt::diagnostics::{GradcheckConfig, LossName};
use dipt::inference::InferenceConfig;
use dipt::sim::{IdssConfig, SiBatch};
use dipt::training::{Ablation, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::InstanceRange;
use crate::error::{CliError, CliResult};

/// Flag values to layer over the base table.
#[derive(Default)]
pub struct Overrides(toml::Table);

impl Overrides {
    pub fn set<T: Serialize>(&mut self, key: &str, value: Option<T>) -> CliResult<()> {
        if let Some(v) = value {
            let v =
                toml::Value::try_from(v).map_err(|e| CliError::usage(format!("--{}: {e}", key.replace('_', "-"))))?;
            self.0.insert(key.to_string(), v);
        }
        Ok(())
    }

    pub fn path(&mut self, key: &str, value: Option<&Path>) -> CliResult<()> {
        self.set(key, value.map(|p| p.display().to_string()))
    }
}

/// Merges `overrides` over the config file (or the defaults without the
/// `required` keys) and deserializes the result.
pub fn resolve<P>(config: Option<&Path>, defaults: &P, required: &[&str], overrides: Overrides) -> CliResult<P>
where
    P: Serialize + DeserializeOwned,
{
    let mut table = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| CliError::usage(format!("config {}: {}", path.display(), e.message())))?
        }
        None => {
            let mut t = toml::Table::try_from(defaults).map_err(|e| CliError::usage(e.to_string()))?;
            for k in required {
                t.remove(*k);
            }
            t
        }
    };
    table.extend(overrides.0);
    let origin = config.map_or_else(|| "arguments".to_string(), |p| format!("config {}", p.display()));
    P::deserialize(toml::Value::Table(table)).map_err(|e| CliError::usage(format!("{origin}: {}", e.message().trim())))
}

/// Makes an input path absolute so a manifest replays from any directory.
pub fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::fs::canonicalize(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub type SimSiParams = SiBatch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimIdssParams {
    pub counties: usize,
    pub population: u64,
    pub instances: usize,
    pub infectious_period_days: usize,
    pub daily_infection_prob: Vec<f64>,
    pub airport_counties: usize,
    pub initial_sources: usize,
    pub initial_infected: usize,
    pub horizon_days: usize,
    pub rng_seed: u64,
}

impl Default for SimIdssParams {
    fn default() -> Self {
        let c = IdssConfig::uniform(100, 10_000);
        Self {
            counties: c.n_counties,
            population: 10_000,
            instances: 1,
            infectious_period_days: c.infectious_period_days,
            daily_infection_prob: c.daily_infection_prob,
            airport_counties: c.n_airport_counties,
            initial_sources: c.n_initial_sources,
            initial_infected: c.n_initial_infected,
            horizon_days: c.horizon_days,
            rng_seed: 0,
        }
    }
}

impl SimIdssParams {
    pub fn idss_config(&self, rng_seed: u64) -> IdssConfig {
        IdssConfig {
            n_counties: self.counties,
            populations: vec![self.population; self.counties],
            infectious_period_days: self.infectious_period_days,
            daily_infection_prob: self.daily_infection_prob.clone(),
            n_airport_counties: self.airport_counties,
            n_initial_sources: self.initial_sources,
            n_initial_infected: self.initial_infected,
            horizon_days: self.horizon_days,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    pub data: PathBuf,
    pub instances: InstanceRange,
    pub observed_fraction: f64,
    pub lr: f64,
    pub epochs: usize,
    pub lambda: f64,
    pub mu: f64,
    pub tree_refresh_every: usize,
    pub ablation: Ablation,
    pub latent_dim: usize,
    pub rng_seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            data: PathBuf::new(),
            instances: InstanceRange::ALL,
            observed_fraction: 0.0,
            lr: t.lr,
            epochs: t.epochs,
            lambda: t.lambda,
            mu: t.mu,
            tree_refresh_every: t.tree_refresh_every,
            ablation: t.ablation,
            latent_dim: t.latent_dim,
            rng_seed: t.rng_seed,
        }
    }
}

impl TrainParams {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            lambda: self.lambda,
            mu: self.mu,
            tree_refresh_every: self.tree_refresh_every,
            ablation: self.ablation,
            latent_dim: self.latent_dim,
            rng_seed: self.rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferParams {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    pub instances: InstanceRange,
    pub iterations: usize,
    pub step_size: f64,
    pub gamma: f64,
    pub seed_threshold: f64,
    pub rng_seed: u64,
}

impl Default for InferParams {
    fn default() -> Self {
        let c = InferenceConfig::default();
        Self {
            data: PathBuf::new(),
            checkpoint: PathBuf::new(),
            instances: InstanceRange::ALL,
            iterations: c.iterations,
            step_size: c.step_size,
            gamma: c.gamma,
            seed_threshold: c.seed_threshold,
            rng_seed: c.rng_seed,
        }
    }
}

impl InferParams {
    pub fn inference_config(&self) -> InferenceConfig {
        InferenceConfig {
            iterations: self.iterations,
            step_size: self.step_size,
            gamma: self.gamma,
            seed_threshold: self.seed_threshold,
            rng_seed: self.rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalParams {
    pub pred: PathBuf,
    pub truth: PathBuf,
    pub instances: InstanceRange,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self { pred: PathBuf::new(), truth: PathBuf::new(), instances: InstanceRange::ALL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckParams {
    pub instances: usize,
    pub max_nodes: usize,
    pub perturbation: f64,
    pub tolerance: f64,
    pub inference_tolerance: f64,
    pub rng_seed: u64,
    /// Test hook: negate this loss's analytic gradient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject_sign_error: Option<LossName>,
}

impl Default for GradcheckParams {
    fn default() -> Self {
        let c = GradcheckConfig::default();
        Self {
            instances: c.instances,
            max_nodes: c.max_nodes,
            perturbation: c.perturbation,
            tolerance: c.tolerance,
            inference_tolerance: c.inference_tolerance,
            rng_seed: c.rng_seed,
            inject_sign_error: None,
        }
    }
}

impl GradcheckParams {
    pub fn config(&self) -> GradcheckConfig {
        GradcheckConfig {
            instances: self.instances,
            max_nodes: self.max_nodes,
            perturbation: self.perturbation,
            tolerance: self.tolerance,
            inference_tolerance: self.inference_tolerance,
            rng_seed: self.rng_seed,
        }
    }
}
