//! Command-line flags, config-file overlay and the resolved run settings.

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use countseries::fit::{GhkConfig, Method, OptimizerConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate one series and write it as CSV.
    Simulate,
    /// Fit a model to a CSV series.
    Fit,
    /// Residuals, ACF/PACF and PIT diagnostics for a fitted copula model.
    Diagnose,
    /// Negative-correlation bounds on a λ grid.
    Bounds,
    /// Copula link coefficients and curves.
    Link,
    /// Replicated simulate-and-fit study on the simulation design.
    Simstudy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Dar1,
    Inar1,
    Cinar,
    SuperRenewal,
    SuperClipped,
    Copula,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::Dar1 => "dar1",
            Family::Inar1 => "inar1",
            Family::Cinar => "cinar",
            Family::SuperRenewal => "super-renewal",
            Family::SuperClipped => "super-clipped",
            Family::Copula => "copula",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptMethod {
    NelderMead,
    Bfgs,
}

/// Every setting of one invocation. Keys of a `--config` TOML file use the
/// flag names and override the flags.
#[derive(Parser, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[command(name = "countseries", version, about = "Simulate, fit and diagnose Poisson-marginal count series")]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    #[arg(value_enum)]
    pub command: Command,

    /// TOML file whose keys override the flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Family::Copula)]
    pub model: Family,

    /// Input CSV with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,

    #[arg(long, default_value = "x")]
    pub count_col: String,

    /// Comma-separated covariate column names.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,

    /// Add a trend covariate t = 1..n ahead of the named covariates.
    #[arg(long)]
    pub trend: bool,

    /// Latent AR orders to fit, e.g. 0,1,2.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub latent_order: Vec<usize>,

    /// Particles used while optimizing and for PIT diagnostics.
    #[arg(long, default_value_t = 1000)]
    pub particles: usize,

    /// Particles for the reported log-likelihood and standard errors.
    #[arg(long, default_value_t = 100_000)]
    pub final_particles: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Replicates per series length in simstudy.
    #[arg(long, default_value_t = 500)]
    pub replicates: usize,

    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,

    /// Parametric-bootstrap series for the Q p-value.
    #[arg(long, default_value_t = 200)]
    pub bootstrap_sims: usize,

    /// Refit every bootstrap series instead of reusing the fitted parameters.
    #[arg(long)]
    pub bootstrap_refit: bool,

    /// Fit record written by `fit`, used by `diagnose`.
    #[arg(long)]
    pub fit_record: Option<PathBuf>,

    /// Series length for simulate.
    #[arg(long, default_value_t = 100)]
    pub n: usize,

    /// Series lengths for simstudy.
    #[arg(long, value_delimiter = ',', default_value = "50,100,300")]
    pub sizes: Vec<usize>,

    /// Constant Poisson mean.
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,

    /// Use the simulation-design mean exp(1 + 0.01 t + C_t).
    #[arg(long)]
    pub design: bool,

    /// Log-mean intercept; with --trend and --beta gives exp(mu + beta t).
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,

    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Vec<f64>,

    /// DAR(1) repeat probability.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,

    /// INAR/CINAR thinning probability.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,

    /// Latent AR coefficients (copula, super-clipped).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.5")]
    pub phi: Vec<f64>,

    /// CINAR lag-selection probabilities.
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.4")]
    pub weights: Vec<f64>,

    /// Renewal lifetime pmf on 1..L.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.5")]
    pub lifetime: Vec<f64>,

    /// Run CINAR through a burn-in before recording.
    #[arg(long)]
    pub burn_in: bool,

    #[arg(long, value_enum, default_value_t = OptMethod::NelderMead)]
    pub method: OptMethod,

    #[arg(long, default_value_t = 2000)]
    pub max_iters: u64,

    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,

    /// Skip the Hessian standard errors.
    #[arg(long)]
    pub no_standard_errors: bool,

    /// Largest residual ACF/PACF lag.
    #[arg(long, default_value_t = 20)]
    pub max_lag: usize,

    #[arg(long, default_value_t = 0.1)]
    pub lambda_min: f64,

    #[arg(long, default_value_t = 10.0)]
    pub lambda_max: f64,

    #[arg(long, default_value_t = 0.1)]
    pub lambda_step: f64,

    /// λ values for link curves.
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
    pub lambdas: Vec<f64>,

    /// Points of the u grid on [-1, 1].
    #[arg(long, default_value_t = 201)]
    pub u_points: usize,

    /// Hermite truncation order.
    #[arg(long, default_value_t = 30)]
    pub truncation: usize,
}

impl Settings {
    /// Parses flags and applies the config file, if any.
    pub fn from_args<I, T>(args: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let flags = Settings::try_parse_from(args)?;
        match flags.config.clone() {
            Some(path) => flags.overlay_file(&path),
            None => Ok(flags),
        }
    }

    pub fn overlay_file(&self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let file: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        self.overlay(file).with_context(|| format!("applying config {}", path.display()))
    }

    pub fn overlay(&self, file: toml::Table) -> Result<Self> {
        let mut base = toml::Table::try_from(self)?;
        for (k, v) in file {
            base.insert(k, v);
        }
        let mut merged: Settings = base.try_into()?;
        merged.config = self.config.clone();
        Ok(merged)
    }

    /// Fully resolved settings as TOML; passing it back with `--config`
    /// replays the run.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            method: match self.method {
                OptMethod::NelderMead => Method::NelderMead,
                OptMethod::Bfgs => Method::Bfgs,
            },
            max_iters: self.max_iters,
            tolerance: self.tolerance,
        }
    }

    pub fn ghk(&self) -> GhkConfig {
        GhkConfig {
            m: self.particles,
            m_final: self.final_particles,
            seed: self.seed,
            optimizer: self.optimizer(),
            standard_errors: !self.no_standard_errors,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 || self.final_particles == 0 {
            bail!("particle counts must be positive");
        }
        if self.latent_order.is_empty() {
            bail!("at least one latent order is required");
        }
        Ok(())
    }
}
