//! Experiment configuration: defaults, overridden by a TOML config file,
//! overridden by environment variables (FRACSEP_*), overridden by CLI flags.

use anyhow::{bail, Context, Result};
use fracsep::operators::QuadratureSpec;
use fracsep::{ModelParams, Variant};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Simulate,
    Evolve,
    Stationary,
    Sweep,
    VerifyOperator,
    VerifyHydro,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Evolve => "evolve",
            Task::Stationary => "stationary",
            Task::Sweep => "sweep",
            Task::VerifyOperator => "verify-operator",
            Task::VerifyHydro => "verify-hydro",
        }
    }
}

/// Flat key-value config file. Every field is optional; anything absent
/// falls back to the built-in defaults, anything present is overridden by
/// environment variables and CLI flags.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ConfigFile {
    pub params: Option<ParamsSection>,
    pub run: Option<RunSection>,
    pub sweep: Option<SweepSection>,
    pub quadrature: Option<QuadSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ParamsSection {
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub variant: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct RunSection {
    pub t: Option<f64>,
    pub samples: Option<usize>,
    pub replicas: Option<u64>,
    pub seed: Option<u64>,
    pub g_init: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct SweepSection {
    pub gamma: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub n_grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct QuadSection {
    pub epsilon: Option<f64>,
    pub tol_interior: Option<f64>,
    pub tol_boundary: Option<f64>,
}

pub fn load_config_file(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

/// The fully resolved experiment: everything a task needs, serialized into
/// the result record for reproducibility.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub params: ModelParams,
    /// macroscopic horizon
    pub t_max: f64,
    /// number of sample times on [0, T] (inclusive endpoints)
    pub samples: usize,
    pub replicas: u64,
    pub seed: u64,
    /// constant initial density profile
    pub g_init: f64,
    pub gamma_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub quad_epsilon: f64,
    pub quad_tol_interior: f64,
    pub quad_tol_boundary: f64,
    pub forced_regime: Option<String>,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn quadrature_spec(&self) -> QuadratureSpec {
        QuadratureSpec {
            epsilon: self.quad_epsilon,
            tol_interior: self.quad_tol_interior,
            tol_boundary: self.quad_tol_boundary,
            ..QuadratureSpec::default()
        }
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let m = self.samples.max(2) - 1;
        (0..=m).map(|i| self.t_max * i as f64 / m as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max < 0.0 {
            bail!("T must be nonnegative");
        }
        if self.samples < 2 {
            bail!("samples must be >= 2");
        }
        if matches!(self.task, Task::Sweep)
            && (self.gamma_grid.is_empty() || self.theta_grid.is_empty())
        {
            bail!("sweep requires nonempty gamma and theta grids");
        }
        if self.gamma_grid.iter().any(|&g| !(g > 0.0 && g < 2.0) || g == 1.0) {
            bail!("sweep gamma grid must avoid 1 and stay inside (0,2)");
        }
        if matches!(self.task, Task::VerifyOperator) && self.n_grid.len() < 2 {
            bail!("verify-operator needs at least two lattice sizes");
        }
        if !(0.0..=1.0).contains(&self.g_init) {
            bail!("g-init must lie in [0,1]");
        }
        if matches!(self.task, Task::VerifyHydro) && self.replicas < 2 {
            bail!("verify-hydro needs at least 2 replicas");
        }
        Ok(())
    }
}

pub fn parse_variant(s: &str) -> Result<Variant> {
    s.parse::<Variant>().map_err(|e| anyhow::anyhow!("{e}"))
}
