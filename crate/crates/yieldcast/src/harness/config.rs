//! Declarative experiment configuration.
//!
//! A single versioned TOML file names the data snapshot, the per-stage date
//! windows and splits, model hyperparameters, and the master seed. Dates are
//! quoted ISO-8601 strings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::data::MissingPolicy;
use crate::error::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    /// Output directory; the YIELDCAST_OUT_DIR environment variable or a CLI
    /// flag can override it.
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub univariate: UnivariateStage,
    pub pca: PcaStage,
    pub multivariate: MultivariateStage,
    pub neural: NeuralStage,
    /// Models to execute, by name: naive, arima_level, arima_diff, garch,
    /// sarimax, var, mlp, lstm_multivariate, lstm_stateless, lstm_stateful.
    pub models: Vec<String>,
    /// Extra artifact stages (currently: vasicek).
    #[serde(default)]
    pub extra_stages: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Snapshot directory; relative paths resolve against the config file.
    pub dir: PathBuf,
    pub missing_policy: MissingPolicy,
    pub yieldsp: String,
    pub treasuries: Vec<String>,
    /// Covariate name -> file.
    pub covariates: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnivariateStage {
    pub start: String,
    pub end: String,
    /// First test date of the walk-forward evaluation.
    pub test_start: String,
    pub arima_level: [usize; 3],
    pub arima_diff: [usize; 3],
    pub refit: RefitChoice,
    pub garch: [usize; 2],
    #[serde(default = "default_adf_lags")]
    pub adf_max_lags: usize,
}

fn default_adf_lags() -> usize {
    20
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RefitChoice {
    EveryStep,
    FixedParams,
}

impl From<RefitChoice> for crate::arima::RefitMode {
    fn from(c: RefitChoice) -> Self {
        match c {
            RefitChoice::EveryStep => crate::arima::RefitMode::EveryStep,
            RefitChoice::FixedParams => crate::arima::RefitMode::FixedParams,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaStage {
    pub start: String,
    pub end: String,
    pub components: usize,
    /// Files (from `data.treasuries`) whose difference defines the spread
    /// checked against the second component.
    pub spread_long: String,
    pub spread_short: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultivariateStage {
    pub start: String,
    pub end: String,
    pub split_fraction: f64,
    pub sarimax: [usize; 3],
    /// Exogenous regressors for the SARIMAX stage; `d_` prefixes request the
    /// first difference of the named covariate.
    pub sarimax_exog: Vec<String>,
    pub granger_max_lag: usize,
    pub var_max_lag: usize,
    /// Fixed lag override; absent means use the AIC-selected order.
    pub var_lag: Option<usize>,
    /// Cholesky ordering over the transformed variable names.
    pub var_ordering: Vec<String>,
    pub irf_horizon: usize,
    pub fevd_horizon: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralStage {
    pub mlp_neurons: Vec<usize>,
    pub mlp_epochs: usize,
    pub mlp_batch: usize,
    pub mlp_repeats: usize,
    pub lstm_units: usize,
    pub lstm_epochs: usize,
    pub lstm_batch: usize,
    #[serde(default)]
    pub stateless: Option<LstmKnobs>,
    #[serde(default)]
    pub stateful: Option<LstmKnobs>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmKnobs {
    pub units: usize,
    pub epochs: usize,
    pub batch: usize,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default)]
    pub patience: Option<usize>,
}

pub(crate) fn parse_date(s: &str, what: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| Error::Config(format!("bad {what} date `{s}`: {e}")))
}

impl ExperimentConfig {
    /// Parses a config file, resolving the data directory against the config
    /// location and validating the basics.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        if cfg.data.dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.data.dir = parent.join(&cfg.data.dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            if !seen.insert(m.clone()) {
                return Err(Error::Config(format!("model `{m}` listed twice")));
            }
            if !KNOWN_MODELS.contains(&m.as_str()) {
                return Err(Error::Config(format!(
                    "unknown model `{m}` (known: {KNOWN_MODELS:?})"
                )));
            }
        }
        if !(self.multivariate.split_fraction > 0.0 && self.multivariate.split_fraction < 1.0) {
            return Err(Error::Config("split_fraction outside (0, 1)".to_string()));
        }
        let u_start = parse_date(&self.univariate.start, "univariate.start")?;
        let u_end = parse_date(&self.univariate.end, "univariate.end")?;
        let u_test = parse_date(&self.univariate.test_start, "univariate.test_start")?;
        if !(u_start < u_test && u_test < u_end) {
            return Err(Error::Config(
                "univariate test_start must lie inside the window".to_string(),
            ));
        }
        let file = self.data.dir.join(&self.data.yieldsp);
        if !file.exists() {
            return Err(Error::Config(format!(
                "yieldsp file {} does not exist",
                file.display()
            )));
        }
        for f in &self.data.treasuries {
            if !self.data.dir.join(f).exists() {
                return Err(Error::Config(format!("treasury file {f} does not exist")));
            }
        }
        for (name, f) in &self.data.covariates {
            if !self.data.dir.join(f).exists() {
                return Err(Error::Config(format!(
                    "covariate `{name}` file {f} does not exist"
                )));
            }
        }
        Ok(())
    }
}

pub const KNOWN_MODELS: [&str; 10] = [
    "naive",
    "arima_level",
    "arima_diff",
    "garch",
    "sarimax",
    "var",
    "mlp",
    "lstm_multivariate",
    "lstm_stateless",
    "lstm_stateful",
];
