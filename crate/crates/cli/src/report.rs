//! Output tables and the run manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::AnalysisConfig;
use crate::error::{CliError, Result};

pub const COEFFICIENT_HEADER: [&str; 7] = ["term", "estimate", "method", "se", "ci_low", "ci_high", "reject"];
pub const PREDICTION_HEADER: [&str; 8] = [
    "line",
    "group",
    "probability",
    "ci_low",
    "ci_high",
    "out_of_range",
    "classification",
    "correction",
];

/// Full-precision number or `NA`.
pub fn num(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub fn flag(x: Option<bool>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| u8::from(v).to_string())
}

/// One row of the coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow {
    pub term: String,
    pub estimate: f64,
    pub method: String,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub reject: Option<bool>,
}

impl CoefficientRow {
    fn record(&self) -> [String; 7] {
        [
            self.term.clone(),
            self.estimate.to_string(),
            self.method.clone(),
            num(self.se),
            num(self.ci.map(|c| c.0)),
            num(self.ci.map(|c| c.1)),
            flag(self.reject),
        ]
    }
}

pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    w.write_record(header).map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_coefficients(path: &Path, rows: &[CoefficientRow]) -> Result<()> {
    write_table(path, &COEFFICIENT_HEADER, rows.iter().map(CoefficientRow::record))
}

/// Reads a coefficient table back as rows of strings keyed by header.
pub fn read_table(path: &Path) -> Result<Vec<Vec<(String, String)>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let headers = r.headers().map_err(|e| CliError::csv(path, e))?.clone();
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| CliError::csv(path, e))?;
            Ok(headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect())
        })
        .collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub input_sha256: Option<String>,
    pub outputs: Vec<PathBuf>,
}

/// The effective configuration plus run provenance. A manifest is itself a
/// valid configuration file, so `--config manifest.toml` repeats the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub config: AnalysisConfig,
    pub run: RunInfo,
}

impl Manifest {
    pub fn new(command: &str, config: &AnalysisConfig, outputs: Vec<PathBuf>) -> Result<Self> {
        let input_sha256 = match &config.data {
            Some(p) if command != "simulate" => Some(sha256_file(p)?),
            _ => None,
        };
        Ok(Self {
            config: config.clone(),
            run: RunInfo {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: config.seed,
                input_sha256,
                outputs,
            },
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize manifest: {e}")))?;
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
