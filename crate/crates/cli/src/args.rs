use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{AnalysisConfig, MethodSelector, Tau};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "rte",
    version,
    about = "Regression for the two-sample relative treatment effect under right censoring"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model and report coefficients.
    Fit(DataArgs),
    /// Fit the model and run bootstrap tests on every coefficient.
    Test(DataArgs),
    /// Predict probabilities and classify covariate profiles.
    Predict(PredictArgs),
    /// Run a Monte Carlo study of a named scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file (a previous run's manifest also works).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Input CSV with group, time, status and covariate columns.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Truncation horizon; a number or `inf`.
    #[arg(long)]
    pub tau: Option<Tau>,
    /// identity, logit or cloglog-complement.
    #[arg(long)]
    pub link: Option<String>,
    /// Bootstrap replicates.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodSelector>,
    /// Group-1 covariate columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub covariates1: Option<Vec<String>>,
    /// Group-2 covariate columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub covariates2: Option<Vec<String>>,
    /// Treat all rows as observed events.
    #[arg(long)]
    pub uncensored: bool,
    /// Fail on singular systems instead of using a pseudo-inverse.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// CSV of covariate profiles; defaults to the rows of the data file.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// with-intercept, slopes-only or model.
    #[arg(long)]
    pub convention: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// i, ii, iii or iv.
    #[arg(long)]
    pub scenario: Option<String>,
    /// I or II.
    #[arg(long)]
    pub setting: Option<String>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    /// Apply administrative censoring.
    #[arg(long)]
    pub censored: bool,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Use the full number of repetitions.
    #[arg(long)]
    pub long_run: bool,
    /// Full bootstrap with this many replicates per dataset instead of the
    /// single warp-speed replicate.
    #[arg(long)]
    pub bootstrap: Option<usize>,
}

fn base(path: &Option<PathBuf>) -> Result<AnalysisConfig> {
    path.as_deref()
        .map_or_else(|| Ok(AnalysisConfig::default()), AnalysisConfig::load)
}

impl CommonArgs {
    fn apply(&self, c: &mut AnalysisConfig) {
        if let Some(v) = &self.out_dir {
            c.out_dir = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = Some(v);
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
    }
}

impl DataArgs {
    pub fn resolve(&self) -> Result<AnalysisConfig> {
        let mut c = base(&self.common.config)?;
        self.common.apply(&mut c);
        if let Some(v) = &self.data {
            c.data = Some(v.clone());
        }
        if self.tau.is_some() {
            c.tau = self.tau;
        }
        if let Some(v) = &self.link {
            c.link = v.clone();
        }
        if let Some(v) = self.bootstrap {
            c.bootstrap = v;
        }
        if let Some(v) = self.method {
            c.method = v;
        }
        if let Some(v) = &self.covariates1 {
            c.covariates1 = v.clone();
        }
        if let Some(v) = &self.covariates2 {
            c.covariates2 = v.clone();
        }
        c.uncensored |= self.uncensored;
        c.strict_singular |= self.strict;
        Ok(c)
    }
}

impl PredictArgs {
    pub fn resolve(&self) -> Result<AnalysisConfig> {
        let mut c = self.data.resolve()?;
        if let Some(v) = &self.profiles {
            c.profiles = Some(v.clone());
        }
        if let Some(v) = &self.convention {
            c.convention = v.clone();
        }
        Ok(c)
    }
}

impl SimulateArgs {
    pub fn resolve(&self) -> Result<AnalysisConfig> {
        let mut c = base(&self.common.config)?;
        self.common.apply(&mut c);
        let s = &mut c.simulation;
        if let Some(v) = &self.scenario {
            s.scenario = v.clone();
        }
        if let Some(v) = &self.setting {
            s.setting = v.clone();
        }
        if let Some(v) = self.n1 {
            s.n1 = v;
        }
        if let Some(v) = self.n2 {
            s.n2 = v;
        }
        if let Some(v) = self.reps {
            s.reps = v;
        }
        if self.bootstrap.is_some() {
            s.full_bootstrap = self.bootstrap;
        }
        s.censored |= self.censored;
        s.long_run |= self.long_run;
        Ok(c)
    }
}
