//! The `fit`, `test`, `predict` and `simulate` workflows.

use std::path::{Path, PathBuf};

use log::{info, warn};
use rte_core::gee::{fit_dataset, FitResult, ModelSpec, NewtonOptions, SingularPolicy};
use rte_core::inference::{bootstrap, test_coefficient};
use rte_core::predict::{correction_for_dataset, Prediction, Predictor};
use rte_core::sim::{run_scenario_with, ScenarioRow};
use rte_core::stats::normal_quantile;
use rte_core::survival::TwoSampleDataset;
use rte_core::Execution;

use crate::config::AnalysisConfig;
use crate::error::{CliError, Result};
use crate::ingest::{ingest_csv, Ingested};
use crate::report::{flag, num, write_coefficients, write_table, CoefficientRow, Manifest, PREDICTION_HEADER};

pub const COEFFICIENTS_FILE: &str = "coefficients.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const SIMULATION_FILE: &str = "simulation.csv";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub fit: FitResult,
    pub coefficients: Vec<CoefficientRow>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PredictOutput {
    pub predictions: Vec<(u64, Option<u8>, Prediction)>,
    pub correction: f64,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub row: ScenarioRow,
    pub outputs: Vec<PathBuf>,
}

/// Coefficient labels: the intercept, then group-1 and group-2 covariates.
pub fn term_names(config: &AnalysisConfig) -> Vec<String> {
    std::iter::once("(intercept)".to_string())
        .chain(config.covariates1.iter().map(|c| format!("g1.{c}")))
        .chain(config.covariates2.iter().map(|c| format!("g2.{c}")))
        .collect()
}

fn model_spec(config: &AnalysisConfig) -> Result<ModelSpec> {
    Ok(ModelSpec {
        link: config.link()?,
        newton: NewtonOptions {
            singular: if config.strict_singular {
                SingularPolicy::Error
            } else {
                SingularPolicy::PseudoInverse
            },
            ..Default::default()
        },
        exec: Execution::default(),
    })
}

fn prepare(config: &AnalysisConfig) -> Result<Ingested> {
    config.validate()?;
    let data = ingest_csv(config.require_data()?, config)?;
    info!(
        "{} + {} subjects, p1 = {}, p2 = {}, tau = {}",
        data.dataset.n1(),
        data.dataset.n2(),
        data.dataset.p1(),
        data.dataset.p2(),
        data.dataset.tau()
    );
    Ok(data)
}

fn out_dir(config: &AnalysisConfig) -> Result<&Path> {
    let dir = config.out_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir)
}

fn finish(command: &str, config: &AnalysisConfig, mut outputs: Vec<PathBuf>) -> Result<Vec<PathBuf>> {
    let path = config.out_dir.join(MANIFEST_FILE);
    Manifest::new(command, config, outputs.clone())?.write(&path)?;
    outputs.push(path);
    Ok(outputs)
}

fn fit_model(data: &TwoSampleDataset, config: &AnalysisConfig) -> Result<FitResult> {
    let fit = fit_dataset(data, &model_spec(config)?)?.result;
    if fit.pseudo_inverse_used {
        warn!("singular system; the estimate uses a pseudo-inverse (set strict_singular to fail instead)");
    }
    Ok(fit)
}

fn sandwich_rows(fit: &FitResult, terms: &[String], alpha: f64) -> Vec<CoefficientRow> {
    let z = normal_quantile(1.0 - alpha / 2.0);
    terms
        .iter()
        .enumerate()
        .map(|(j, term)| {
            let estimate = fit.beta[j];
            let se = fit.covariance.as_ref().map(|c| c[(j, j)].max(0.0).sqrt());
            CoefficientRow {
                term: term.clone(),
                estimate,
                method: if se.is_some() { "sandwich" } else { "none" }.to_string(),
                se,
                ci: se.map(|s| (estimate - z * s, estimate + z * s)),
                reject: se.filter(|&s| s > 0.0).map(|s| estimate.abs() / s > z),
            }
        })
        .collect()
}

/// Fits the model; uncensored identity-link fits also get sandwich errors.
pub fn cmd_fit(config: &AnalysisConfig) -> Result<FitOutput> {
    let data = prepare(config)?;
    let fit = fit_model(&data.dataset, config)?;
    let terms = term_names(config);
    let coefficients = sandwich_rows(&fit, &terms, config.alpha);
    if fit.covariance.is_none() {
        info!("no analytic standard errors for this model; `rte test` gives bootstrap errors");
    }
    let path = out_dir(config)?.join(COEFFICIENTS_FILE);
    write_coefficients(&path, &coefficients)?;
    let outputs = finish("fit", config, vec![path])?;
    Ok(FitOutput {
        fit,
        coefficients,
        outputs,
    })
}

/// Fits the model and tests every coefficient against its bootstrap distribution.
pub fn cmd_test(config: &AnalysisConfig) -> Result<FitOutput> {
    let seed = config.require_seed("test")?;
    let data = prepare(config)?;
    let spec = model_spec(config)?;
    let fit = fit_model(&data.dataset, config)?;
    let terms = term_names(config);
    let ensemble = bootstrap(&data.dataset, &spec, config.bootstrap, seed)?;
    if ensemble.is_unreliable() {
        warn!(
            "{} of {} bootstrap replicates failed; results are unreliable",
            ensemble.failed(),
            ensemble.requested()
        );
    }
    let mut coefficients: Vec<CoefficientRow> = if fit.covariance.is_some() {
        sandwich_rows(&fit, &terms, config.alpha)
    } else {
        Vec::new()
    };
    for (j, term) in terms.iter().enumerate() {
        let report = test_coefficient(&ensemble, j, config.alpha)?;
        for method in config.method.methods() {
            let o = report.outcome(method);
            coefficients.push(CoefficientRow {
                term: term.clone(),
                estimate: report.estimate,
                method: method.name().to_string(),
                se: o.scale,
                ci: o.ci,
                reject: o.reject,
            });
        }
    }
    let path = out_dir(config)?.join(COEFFICIENTS_FILE);
    write_coefficients(&path, &coefficients)?;
    let outputs = finish("test", config, vec![path])?;
    Ok(FitOutput {
        fit,
        coefficients,
        outputs,
    })
}

type Profile = (u64, Option<u8>, Vec<f64>, Vec<f64>);

/// Covariate profiles from a CSV holding both groups' covariate columns.
/// Rows lacking any of them are skipped.
pub fn read_profiles(path: &Path, config: &AnalysisConfig) -> Result<Vec<Profile>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| CliError::csv(path, e))?.clone();
    let index = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: name.to_string(),
            message: "profile column is missing from the header".into(),
        })
    };
    let c1 = config
        .covariates1
        .iter()
        .map(|c| index(c))
        .collect::<Result<Vec<_>>>()?;
    let c2 = config
        .covariates2
        .iter()
        .map(|c| index(c))
        .collect::<Result<Vec<_>>>()?;
    let group_col = headers.iter().position(|h| h == "group");
    let mut profiles = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let values = |cols: &[usize]| -> Option<Vec<f64>> {
            cols.iter()
                .map(|&c| {
                    record
                        .get(c)
                        .and_then(|s| s.parse::<f64>().ok())
                        .filter(|x| x.is_finite())
                })
                .collect()
        };
        match (values(&c1), values(&c2)) {
            (Some(z1), Some(z2)) => {
                let group = group_col.and_then(|c| record.get(c)).and_then(|g| g.parse().ok());
                profiles.push((line, group, z1, z2));
            }
            _ => warn!("{}: line {line}: incomplete covariate profile skipped", path.display()),
        }
    }
    Ok(profiles)
}

/// Predicted probabilities with bootstrap intervals and benefit labels.
pub fn cmd_predict(config: &AnalysisConfig) -> Result<PredictOutput> {
    let seed = config.require_seed("predict")?;
    let convention = config.convention()?;
    let data = prepare(config)?;
    let link = config.link()?;
    let spec = model_spec(config)?;
    let fit = fit_model(&data.dataset, config)?;
    let ensemble = bootstrap(&data.dataset, &spec, config.bootstrap, seed)?;
    let correction = correction_for_dataset(&data.dataset)?;
    info!("tie correction term {correction}");
    let predictor = Predictor {
        fit: &fit,
        correction,
        link: &link,
        convention,
        replicates: ensemble.replicates(),
        method: config.method.primary(),
        alpha: config.alpha,
    };
    let source = config.profiles.as_deref().unwrap_or(config.require_data()?);
    let profiles = read_profiles(source, config)?;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = profiles.iter().map(|p| (p.2.clone(), p.3.clone())).collect();
    let predicted = predictor.predict_batch(&pairs, Execution::default())?;
    let out_of_range = predicted.iter().filter(|p| p.out_of_range).count();
    if out_of_range > 0 {
        warn!("{out_of_range} prediction(s) fall outside [0, 1]; values are reported unclamped");
    }
    let predictions: Vec<(u64, Option<u8>, Prediction)> = profiles
        .iter()
        .zip(predicted)
        .map(|(p, pred)| (p.0, p.1, pred))
        .collect();
    let path = out_dir(config)?.join(PREDICTIONS_FILE);
    write_table(
        &path,
        &PREDICTION_HEADER,
        predictions.iter().map(|(line, group, p)| {
            [
                line.to_string(),
                group.map_or_else(|| "NA".into(), |g| g.to_string()),
                p.point.to_string(),
                num(p.ci_low),
                num(p.ci_high),
                flag(Some(p.out_of_range)),
                p.classification.to_string(),
                correction.to_string(),
            ]
        }),
    )?;
    let outputs = finish("predict", config, vec![path])?;
    Ok(PredictOutput {
        predictions,
        correction,
        outputs,
    })
}

/// Monte Carlo rejection rates for a named scenario.
pub fn cmd_simulate(config: &AnalysisConfig) -> Result<SimulateOutput> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(CliError::Config(format!(
            "alpha must lie in (0, 1), got {}",
            config.alpha
        )));
    }
    let seed = config.require_seed("simulate")?;
    let sim = &config.simulation;
    let scenario = sim.scenario()?;
    let reps = sim.effective_reps();
    if reps == 0 {
        return Err(CliError::Config("reps must be at least 1".into()));
    }
    info!("{}: {reps} repetitions", scenario.label());
    let outcome = run_scenario_with(&scenario, reps, sim.mode(), seed, config.alpha, Execution::default())?;
    if outcome.row.failed > 0 {
        warn!("{} of {reps} repetitions failed and were excluded", outcome.row.failed);
    }
    let dir = out_dir(config)?;
    let table = dir.join(SIMULATION_FILE);
    let text = format!("{}\n{}\n", ScenarioRow::CSV_HEADER, outcome.row.to_csv());
    std::fs::write(&table, text).map_err(|e| CliError::io(&table, e))?;
    let estimates = dir.join(ESTIMATES_FILE);
    let p = outcome.estimates.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("rep".to_string())
        .chain((0..p).map(|j| format!("beta{j}")))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(
        &estimates,
        &header_refs,
        outcome.estimates.iter().enumerate().map(|(m, b)| {
            std::iter::once(m.to_string())
                .chain(b.iter().map(f64::to_string))
                .collect::<Vec<_>>()
        }),
    )?;
    let outputs = finish("simulate", config, vec![table, estimates])?;
    Ok(SimulateOutput {
        row: outcome.row,
        outputs,
    })
}
