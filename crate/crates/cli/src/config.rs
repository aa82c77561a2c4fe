//! Flat JSON run configuration.

use regfbm_core::experiments::{ExperimentConfig, SamplerKind};
use regfbm_core::{HurstParam, ModelParams, RngSeed};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "REGFBM_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Rejection,
    Endpoint,
}

/// The configuration document exactly as accepted on disk. Optional keys
/// fall back to the experiment defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "H")]
    h: f64,
    theta: f64,
    lambda: f64,
    c: f64,
    b_grid: Vec<f64>,
    n_target: usize,
    dt_rule: Option<f64>,
    window_rule: Option<f64>,
    sampler: Option<Sampler>,
    r: Option<f64>,
    seed: Option<u64>,
}

/// Fully resolved configuration in canonical key order. Its serialization
/// is what the config hash covers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Canonical {
    #[serde(rename = "H")]
    pub h: f64,
    pub theta: f64,
    pub lambda: f64,
    pub c: f64,
    pub b_grid: Vec<f64>,
    pub n_target: usize,
    pub dt_rule: f64,
    pub window_rule: f64,
    pub sampler: Sampler,
    pub r: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub canonical: Canonical,
    pub params: ModelParams,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.canonical.seed
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.canonical).expect("canonical config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Parses and validates a configuration document. `seed_override` takes
/// precedence over the document's `seed` key.
pub fn parse_config(text: &str, seed_override: Option<u64>) -> Result<RunConfig, CliError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let h = HurstParam::new(raw.h).map_err(|e| CliError::Config(format!("H: {e}")))?;
    let params = ModelParams::new(h, raw.theta, raw.lambda, raw.c)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let seed = seed_override.or(raw.seed).unwrap_or(0);
    let mut experiment = ExperimentConfig::new(
        params,
        raw.b_grid.clone(),
        raw.n_target,
        RngSeed::new(seed, 0),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(v) = raw.dt_rule {
        experiment.dt_rule = v;
    }
    if let Some(v) = raw.window_rule {
        experiment.window_rule = v;
    }
    if let Some(v) = raw.r {
        experiment.r = v;
    }
    let sampler = raw.sampler.unwrap_or(Sampler::Rejection);
    experiment.sampler = match sampler {
        Sampler::Rejection => SamplerKind::Rejection,
        Sampler::Endpoint => SamplerKind::EndpointConditioned,
    };
    experiment
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let canonical = Canonical {
        h: raw.h,
        theta: raw.theta,
        lambda: raw.lambda,
        c: raw.c,
        b_grid: raw.b_grid,
        n_target: raw.n_target,
        dt_rule: experiment.dt_rule,
        window_rule: experiment.window_rule,
        sampler,
        r: experiment.r,
        seed,
    };
    Ok(RunConfig {
        canonical,
        params,
        experiment,
    })
}

/// Reads `REGFBM_SEED`, rejecting values that are not unsigned integers.
pub fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            CliError::Config(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))
        }),
        Err(_) => Ok(None),
    }
}
