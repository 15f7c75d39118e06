//! CSV ingestion with complete-case handling.
//!
//! Required columns are `group` (1 or 2), `time` and `status` (0 or 1); the
//! status column may be omitted in uncensored mode. Covariates are read from
//! the columns listed for each group. Rows with an empty or `NA` value in a
//! column they use are excluded with a warning; malformed values are errors.

use std::io::Read;
use std::path::{Path, PathBuf};

use log::warn;
use rte_core::survival::{CensoringMode, Observation, TwoSampleDataset};

use crate::config::AnalysisConfig;
use crate::error::{CliError, Result};

/// A validated dataset and where its rows came from.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: TwoSampleDataset,
    /// Source line of each subject, per group.
    pub lines1: Vec<u64>,
    pub lines2: Vec<u64>,
    /// Lines excluded for missing values.
    pub dropped: Vec<u64>,
    /// τ was not configured and was set from the data.
    pub tau_defaulted: bool,
}

fn is_missing(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan")
}

struct Columns {
    group: usize,
    time: usize,
    status: Option<usize>,
    z1: Vec<usize>,
    z2: Vec<usize>,
}

fn locate(headers: &csv::StringRecord, config: &AnalysisConfig, path: &Path) -> Result<Columns> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let require = |name: &str| {
        find(name).ok_or_else(|| CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: name.to_string(),
            message: "required column is missing from the header".into(),
        })
    };
    let group = require("group")?;
    let time = require("time")?;
    let status = if config.uncensored {
        find("status")
    } else {
        Some(require("status")?)
    };
    let z1 = config.covariates1.iter().map(|c| require(c)).collect::<Result<_>>()?;
    let z2 = config.covariates2.iter().map(|c| require(c)).collect::<Result<_>>()?;
    Ok(Columns {
        group,
        time,
        status,
        z1,
        z2,
    })
}

/// Reads a dataset from a CSV file.
pub fn ingest_csv(path: &Path, config: &AnalysisConfig) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    ingest_reader(file, path, config)
}

/// Reads a dataset from any CSV source; `path` labels diagnostics.
pub fn ingest_reader<R: Read>(reader: R, path: &Path, config: &AnalysisConfig) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::csv(path, e))?.clone();
    let cols = locate(&headers, config, path)?;
    let mode = if config.uncensored {
        CensoringMode::Uncensored
    } else {
        CensoringMode::Censored
    };
    let (mut g1, mut g2) = (Vec::new(), Vec::new());
    let (mut lines1, mut lines2) = (Vec::new(), Vec::new());
    let mut dropped = Vec::new();
    let mut ignored_status = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |col: usize, message: String| CliError::Parse {
            path: path.to_path_buf(),
            line,
            column: headers.get(col).unwrap_or("?").to_string(),
            message,
        };
        let field = |col: usize| record.get(col).unwrap_or("");
        let number = |col: usize| -> Result<f64> {
            let raw = field(col);
            raw.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(col, format!("expected a finite number, got `{raw}`")))
        };
        let group = match field(cols.group) {
            "1" => 1,
            "2" => 2,
            other => return Err(err(cols.group, format!("group must be 1 or 2, got `{other}`"))),
        };
        let zcols = if group == 1 { &cols.z1 } else { &cols.z2 };
        let mut used = std::iter::once(cols.time)
            .chain(cols.status.filter(|_| !config.uncensored))
            .chain(zcols.iter().copied());
        if let Some(col) = used.find(|&c| is_missing(field(c))) {
            warn!(
                "{}: line {line}: missing value in column `{}`; row excluded",
                path.display(),
                headers.get(col).unwrap_or("?")
            );
            dropped.push(line);
            continue;
        }
        let time = number(cols.time)?;
        if mode == CensoringMode::Censored && time < 0.0 {
            return Err(err(
                cols.time,
                format!("negative time {time} is only allowed in uncensored mode"),
            ));
        }
        let event = match cols.status.map(|c| (c, field(c))) {
            None => true,
            Some((_, s)) if config.uncensored && is_missing(s) => true,
            Some((_, "1")) => true,
            Some((_, "0")) => {
                if config.uncensored {
                    ignored_status += 1;
                }
                false
            }
            Some((c, s)) => return Err(err(c, format!("status must be 0 or 1, got `{s}`"))),
        };
        let z = zcols.iter().map(|&c| number(c)).collect::<Result<Vec<_>>>()?;
        let obs = Observation::new(time, event || config.uncensored, z);
        if group == 1 {
            g1.push(obs);
            lines1.push(line);
        } else {
            g2.push(obs);
            lines2.push(line);
        }
    }
    if !dropped.is_empty() {
        warn!(
            "{}: {} row(s) excluded for missing values",
            path.display(),
            dropped.len()
        );
    }
    if ignored_status > 0 {
        warn!(
            "{}: uncensored mode treats {ignored_status} row(s) with status 0 as observed events",
            path.display()
        );
    }
    let max_time = g1.iter().chain(&g2).map(|o| o.time).fold(f64::NEG_INFINITY, f64::max);
    let (tau, tau_defaulted) = match config.tau {
        Some(t) => (t.0, false),
        None if config.uncensored => (f64::INFINITY, false),
        None => {
            warn!("no tau configured; using the largest observed time {max_time}");
            (max_time, true)
        }
    };
    let dataset = TwoSampleDataset::new(g1, g2, tau, mode).map_err(|source| CliError::InvalidData {
        path: PathBuf::from(path),
        source,
    })?;
    Ok(Ingested {
        dataset,
        lines1,
        lines2,
        dropped,
        tau_defaulted,
    })
}

/// Writes a dataset in the ingestion format, with covariate columns named
/// after the configuration.
pub fn write_csv(path: &Path, data: &TwoSampleDataset, config: &AnalysisConfig) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let mut header = vec!["group".to_string(), "time".into(), "status".into()];
    header.extend(config.covariates1.iter().cloned());
    header.extend(
        config
            .covariates2
            .iter()
            .filter(|c| !config.covariates1.contains(c))
            .cloned(),
    );
    w.write_record(&header).map_err(|e| CliError::csv(path, e))?;
    for (group, obs, names) in [
        (1, data.group1(), &config.covariates1),
        (2, data.group2(), &config.covariates2),
    ] {
        for o in obs {
            let mut row = vec![group.to_string(), o.time.to_string(), u8::from(o.event).to_string()];
            row.extend(header[3..].iter().map(|h| {
                names
                    .iter()
                    .position(|n| n == h)
                    .map_or_else(|| "NA".to_string(), |k| o.covariates[k].to_string())
            }));
            w.write_record(&row).map_err(|e| CliError::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
