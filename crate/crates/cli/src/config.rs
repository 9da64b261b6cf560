//! Run configuration: one TOML or JSON document per run.

use std::collections::BTreeMap;
use std::path::Path;

use cantor_spectral::io::FunctionFile;
use cantor_spectral::Potential;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub matrix: Vec<Vec<u64>>,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    pub gamma: f64,
    pub level: usize,
    #[serde(default)]
    pub weyl: WeylOptions,
    #[serde(default)]
    pub heat: HeatOptions,
    #[serde(default)]
    pub cohomology: CohomologyOptions,
    #[serde(default)]
    pub hodge: HodgeOptions,
}

/// Block values keyed by comma-separated edge ids, e.g. `"0,2" = 0.5`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub depth: usize,
    #[serde(default)]
    pub blocks: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylOptions {
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatOptions {
    /// Times at which the kernel is sampled; ten log-spaced points in `[0.01, 1]` by default.
    pub times: Option<Vec<f64>>,
    /// Pairs of level-`K` paths; by default the first path against a spread of others.
    pub pairs: Option<Vec<(String, String)>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohomologyOptions {
    /// Paths whose cylinder indicators get class vectors.
    #[serde(default)]
    pub indicators: Vec<String>,
    #[serde(default)]
    pub functions: Vec<FunctionFile>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HodgeOptions {
    /// Coefficients on the dual basis of the trace basis; used when `function` is absent.
    pub coefficients: Option<Vec<f64>>,
    pub function: Option<FunctionFile>,
    /// Levels for the convergence report; `1..=level` by default.
    pub levels: Option<Vec<usize>>,
}

impl RunConfig {
    /// Parses `text` as JSON when the path ends in `.json`, as TOML otherwise.
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        };
        if !cfg.gamma.is_finite() || cfg.gamma <= 0.0 {
            return Err(CliError::Config(format!("gamma must be positive, got {}", cfg.gamma)));
        }
        Ok(cfg)
    }

    pub fn potential(&self) -> Result<Potential, CliError> {
        match &self.potential {
            None => Ok(Potential::zero()),
            Some(p) if p.depth == 0 => Err(CliError::Config("potential depth must be at least 1".into())),
            Some(p) => Ok(Potential::from_block_strings(p.depth, p.blocks.iter().map(|(k, v)| (k.as_str(), *v)))?),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
