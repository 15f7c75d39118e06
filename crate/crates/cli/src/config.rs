//! Analysis configuration, loaded from TOML and overridden by flags.

use std::fmt;
use std::path::{Path, PathBuf};

use rte_core::inference::TestMethod;
use rte_core::predict::Convention;
use rte_core::sim::{BootstrapMode, Scenario, ScenarioId, Setting};
use rte_core::Link;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Repetitions used by `simulate --long-run`.
pub const LONG_RUN_REPS: usize = 10_000;

/// Truncation horizon: a positive real or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TauRepr", into = "TauRepr")]
pub struct Tau(pub f64);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TauRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<TauRepr> for Tau {
    type Error = String;

    fn try_from(r: TauRepr) -> std::result::Result<Self, String> {
        match r {
            TauRepr::Number(x) => Ok(Tau(x)),
            TauRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Tau> for TauRepr {
    fn from(t: Tau) -> Self {
        if t.0.is_infinite() {
            TauRepr::Text("inf".into())
        } else {
            TauRepr::Number(t.0)
        }
    }
}

impl std::str::FromStr for Tau {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(Tau(f64::INFINITY)),
            t => t
                .parse()
                .map(Tau)
                .map_err(|_| format!("tau must be a number or \"inf\", got `{s}`")),
        }
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Which bootstrap tests to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodSelector {
    Emp,
    Iqr,
    Mad,
    Quantile,
    #[default]
    All,
}

impl MethodSelector {
    pub fn methods(self) -> Vec<TestMethod> {
        match self {
            MethodSelector::Emp => vec![TestMethod::Emp],
            MethodSelector::Iqr => vec![TestMethod::Iqr],
            MethodSelector::Mad => vec![TestMethod::Mad],
            MethodSelector::Quantile => vec![TestMethod::Quantile],
            MethodSelector::All => TestMethod::ALL.to_vec(),
        }
    }

    /// Interval method for predictions; `all` falls back to the empirical SD.
    pub fn primary(self) -> TestMethod {
        match self {
            MethodSelector::All => TestMethod::Emp,
            m => m.methods()[0],
        }
    }
}

/// Monte Carlo study settings for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub scenario: String,
    pub setting: String,
    pub n1: usize,
    pub n2: usize,
    pub censored: bool,
    pub reps: usize,
    pub long_run: bool,
    /// Bootstrap replicates per dataset; unset means one warp-speed replicate.
    pub full_bootstrap: Option<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            scenario: "i".into(),
            setting: "II".into(),
            n1: 50,
            n2: 50,
            censored: false,
            reps: 500,
            long_run: false,
            full_bootstrap: None,
        }
    }
}

impl SimulationConfig {
    pub fn scenario(&self) -> Result<Scenario> {
        let id = ScenarioId::parse(&self.scenario)
            .ok_or_else(|| CliError::Config(format!("unknown scenario `{}` (use i, ii, iii or iv)", self.scenario)))?;
        let setting = Setting::parse(&self.setting)
            .ok_or_else(|| CliError::Config(format!("unknown setting `{}` (use I or II)", self.setting)))?;
        if self.n1 < 2 || self.n2 < 2 {
            return Err(CliError::Config("each group needs at least 2 subjects".into()));
        }
        Ok(Scenario::named(id, setting, self.n1, self.n2, self.censored))
    }

    pub fn effective_reps(&self) -> usize {
        if self.long_run {
            LONG_RUN_REPS
        } else {
            self.reps
        }
    }

    pub fn mode(&self) -> BootstrapMode {
        match self.full_bootstrap {
            Some(replicates) => BootstrapMode::Full { replicates },
            None => BootstrapMode::WarpSpeed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub data: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub link: String,
    pub tau: Option<Tau>,
    /// Treat every row as an observed event; times may then be negative.
    pub uncensored: bool,
    pub bootstrap: usize,
    pub alpha: f64,
    pub seed: Option<u64>,
    pub method: MethodSelector,
    pub covariates1: Vec<String>,
    pub covariates2: Vec<String>,
    /// Fail instead of falling back to a pseudo-inverse on singular systems.
    pub strict_singular: bool,
    pub convention: String,
    /// Covariate profiles to predict; defaults to the rows of `data`.
    pub profiles: Option<PathBuf>,
    pub simulation: SimulationConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            data: None,
            out_dir: PathBuf::from("rte-out"),
            link: "identity".into(),
            tau: None,
            uncensored: false,
            bootstrap: rte_core::inference::DEFAULT_REPLICATES,
            alpha: 0.05,
            seed: None,
            method: MethodSelector::All,
            covariates1: Vec::new(),
            covariates2: Vec::new(),
            strict_singular: false,
            convention: "with-intercept".into(),
            profiles: None,
            simulation: SimulationConfig::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.bootstrap < 1 {
            return Err(CliError::Config("bootstrap must be at least 1".into()));
        }
        if let Some(t) = self.tau {
            if t.0.is_nan() || t.0 <= 0.0 {
                return Err(CliError::Config(format!("tau must be positive, got {t}")));
            }
        }
        self.link()?;
        self.convention()?;
        Ok(())
    }

    pub fn link(&self) -> Result<Link> {
        Link::from_name(&self.link).ok_or_else(|| {
            CliError::Config(format!(
                "unknown link `{}` (use identity, logit or cloglog-complement)",
                self.link
            ))
        })
    }

    pub fn convention(&self) -> Result<Convention> {
        Convention::parse(&self.convention).ok_or_else(|| {
            CliError::Config(format!(
                "unknown convention `{}` (use with-intercept, slopes-only or model)",
                self.convention
            ))
        })
    }

    pub fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| CliError::Config(format!("`{command}` needs a seed (--seed or `seed` in the config)")))
    }

    pub fn require_data(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| CliError::Config("no input data (--data or `data` in the config)".into()))
    }
}
