//! Run configuration: one JSON document per run, unknown keys rejected.

use std::path::Path;

use fou2_core::fpe::{DriftSpec, Grid1D};
use fou2_core::langevin::KernelScheme;
use fou2_core::verify::Tier;
use fou2_core::{ProcessParams, SeriesControl};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_params")]
    pub params: ProcessParams,
    #[serde(default)]
    pub series: SeriesControl,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fpe: Option<FpeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
}

fn default_params() -> ProcessParams {
    ProcessParams::new(0.8, 0.9, 0.7).expect("valid defaults")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            params: default_params(),
            series: SeriesControl::default(),
            eval: None,
            simulate: None,
            fpe: None,
            verify: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Times for the one-time table.
    pub times: Vec<f64>,
    /// Horizon of the pinned-path profile U(t); defaults to the largest time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// (t, s) pairs for the covariance table.
    #[serde(default)]
    pub pairs: Vec<[f64; 2]>,
    #[serde(default = "default_nodes")]
    pub n_nodes: usize,
}

fn default_nodes() -> usize {
    fou2_core::kernel::DEFAULT_NODES
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleFormat {
    Binary,
    Csv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheme: KernelScheme,
    #[serde(default = "default_format")]
    pub format: EnsembleFormat,
    /// Grid indices reported in the summary; ten evenly spaced by default.
    #[serde(default)]
    pub report_indices: Vec<usize>,
}

fn default_format() -> EnsembleFormat {
    EnsembleFormat::Binary
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpeConfig {
    pub grid: Grid1D,
    pub drift: DriftSpec,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_tol: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub tier: Tier,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.series.validate().map_err(usage)?;
        if let Some(e) = &self.eval {
            if e.times.is_empty() && e.pairs.is_empty() {
                return Err(CliError::Usage("eval needs a non-empty times or pairs list".into()));
            }
            if e.times.iter().chain(e.pairs.iter().flatten()).any(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(CliError::Usage("eval times must be positive and finite".into()));
            }
            if let Some(b) = e.beta {
                if b.is_nan() || b <= 0.0 || e.times.iter().any(|&t| t > b) {
                    return Err(CliError::Usage(format!("eval beta = {b} must be positive and cover all times")));
                }
            }
            if e.n_nodes < 16 {
                return Err(CliError::Usage(format!("n_nodes must be at least 16, got {}", e.n_nodes)));
            }
        }
        if let Some(s) = &self.simulate {
            if !(s.dt > 0.0 && s.dt.is_finite()) || s.n_steps == 0 || s.n_paths == 0 {
                return Err(CliError::Usage("simulate needs dt > 0, n_steps ≥ 1 and n_paths ≥ 1".into()));
            }
            if let Some(k) = s.report_indices.iter().find(|&&k| k > s.n_steps) {
                return Err(CliError::Usage(format!("report index {k} exceeds n_steps = {}", s.n_steps)));
            }
        }
        if let Some(f) = &self.fpe {
            f.grid.validate().map_err(usage)?;
            f.drift.validate().map_err(usage)?;
            if let Some(tol) = f.local_tol {
                if tol.is_nan() || tol <= 0.0 {
                    return Err(CliError::Usage(format!("local_tol must be positive, got {tol}")));
                }
            }
        }
        Ok(())
    }
}

fn usage(e: fou2_core::Error) -> CliError {
    CliError::Usage(e.to_string())
}
