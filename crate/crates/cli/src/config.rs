use std::path::Path;

use lyapmkv::funcspace::SpaceParams;
use lyapmkv::markov::{build_chain_with, ShiftPolicy};
use lyapmkv::{MarkovChainSpec, Matrix, MatrixFamily};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Estimate,
    Spectrum,
    Diagnose,
    Oracle,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_mc_n")]
    pub n: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n: default_mc_n(),
            replicas: default_replicas(),
            burn_in: default_burn_in(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_traces")]
    pub traces: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            report: default_report(),
            traces: default_traces(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: String,
    /// `k` matrices, each a list of rows.
    pub matrices: Vec<Vec<Vec<f64>>>,
    /// Row-stochastic `k x k` transition matrix.
    pub transition: Vec<Vec<f64>>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_t_step")]
    pub t_step: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_strict")]
    pub strict_full_shift: bool,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_mode() -> Mode {
    Mode::All
}
fn default_grid() -> usize {
    1024
}
fn default_alpha() -> f64 {
    lyapmkv::funcspace::DEFAULT_ALPHA
}
fn default_theta() -> f64 {
    lyapmkv::funcspace::DEFAULT_THETA
}
fn default_t_step() -> f64 {
    1e-2
}
fn default_t_max() -> f64 {
    lyapmkv::transfer::DEFAULT_T_MAX
}
fn default_mc_n() -> usize {
    100_000
}
fn default_replicas() -> usize {
    64
}
fn default_burn_in() -> usize {
    1000
}
fn default_strict() -> bool {
    true
}
fn default_report() -> String {
    "report.json".into()
}
fn default_traces() -> String {
    "traces.csv".into()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::ConfigParse(format!(
                "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn family(&self) -> Result<MatrixFamily, CliError> {
        let ms = self
            .matrices
            .iter()
            .map(|rows| Matrix::from_rows(rows))
            .collect::<lyapmkv::Result<Vec<_>>>()?;
        Ok(MatrixFamily::from_matrices(ms)?)
    }

    pub fn chain(&self) -> Result<MarkovChainSpec, CliError> {
        if self.transition.len() != self.matrices.len() {
            return Err(lyapmkv::Error::DimensionMismatch(format!(
                "{} matrices but a {}-state transition matrix",
                self.matrices.len(),
                self.transition.len()
            ))
            .into());
        }
        let policy = if self.strict_full_shift {
            ShiftPolicy::Strict
        } else {
            ShiftPolicy::Warn
        };
        Ok(build_chain_with(&self.transition, policy)?)
    }

    pub fn params(&self) -> Result<SpaceParams, CliError> {
        Ok(SpaceParams::new(self.alpha, self.theta)?)
    }

    /// Checks everything that does not need the numerics to run.
    pub fn validate(&self) -> Result<(MatrixFamily, MarkovChainSpec), CliError> {
        let family = self.family()?;
        let chain = self.chain()?;
        self.params()?;
        let invalid = |msg: String| Err(CliError::from(lyapmkv::Error::InvalidArgument(msg)));
        if self.grid < 16 {
            return invalid(format!("grid = {} must be at least 16", self.grid));
        }
        if !(1e-5..=1e-1).contains(&self.t_step) {
            return invalid(format!("t_step = {} not in [1e-5, 1e-1]", self.t_step));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return invalid(format!("t_max = {} must be positive", self.t_max));
        }
        if self.mc.n == 0 || self.mc.replicas < 2 || self.mc.burn_in >= self.mc.n {
            return invalid(format!(
                "mc needs n >= 1, replicas >= 2 and burn_in < n (got {:?})",
                self.mc
            ));
        }
        Ok((family, chain))
    }
}
