//! Tie-corrected probability predictions for covariate profiles and their
//! benefit classification.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::gee::FitResult;
use crate::inference::{ReferenceDistribution, TestMethod};
use crate::link::Link;
use crate::survival::{kaplan_meier, SurvivalCurve, TwoSampleDataset};

/// 0.5·[S1(τ)S2(τ) + Σ_{t ≤ τ} ΔS1(t)ΔS2(t)]: half the estimated chance
/// that the τ-truncated times tie.
pub fn tie_correction_term(s1: &SurvivalCurve, s2: &SurvivalCurve, tau: f64) -> f64 {
    let plateau = s1.eval(tau) * s2.eval(tau);
    let mut shared = 0.0;
    let mut j1 = s1.jumps().take_while(|&(t, _)| t <= tau).peekable();
    for (t, d2) in s2.jumps().take_while(|&(t, _)| t <= tau) {
        while j1.next_if(|&(u, _)| u < t).is_some() {}
        if let Some(&(u, d1)) = j1.peek() {
            if u == t {
                shared += d1 * d2;
            }
        }
    }
    0.5 * (plateau + shared)
}

/// Correction term from the Kaplan–Meier curves of a dataset at its τ.
pub fn correction_for_dataset(data: &TwoSampleDataset) -> Result<f64> {
    let s1 = kaplan_meier(data.group1())?;
    let s2 = kaplan_meier(data.group2())?;
    Ok(tie_correction_term(&s1, &s2, data.tau()))
}

/// How a fitted model is turned into a probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// correction + β̂0 + β̂1ᵀz1 + β̂2ᵀz2 (identity link only).
    #[default]
    WithIntercept,
    /// correction + β̂1ᵀz1 + β̂2ᵀz2 (identity link only).
    SlopesOnly,
    /// μ(β̂ᵀZ) without correction; any link.
    Model,
}

impl Convention {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "with-intercept" => Some(Convention::WithIntercept),
            "slopes-only" => Some(Convention::SlopesOnly),
            "model" => Some(Convention::Model),
            _ => None,
        }
    }
}

/// Three-way benefit label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    InterventionBenefit,
    ControlBenefit,
    Indeterminate,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::InterventionBenefit => "intervention-benefit",
            Classification::ControlBenefit => "control-benefit",
            Classification::Indeterminate => "indeterminate",
        })
    }
}

/// Intervention benefit when the interval lies above 0.5, control benefit
/// when it lies below, otherwise indeterminate.
pub fn classify(ci_low: f64, ci_high: f64) -> Classification {
    if ci_low > 0.5 {
        Classification::InterventionBenefit
    } else if ci_high < 0.5 {
        Classification::ControlBenefit
    } else {
        Classification::Indeterminate
    }
}

/// Point estimate, interval and label for one covariate profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    /// Unclamped estimate.
    pub point: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Set when `point` lies outside [0, 1].
    pub out_of_range: bool,
    pub classification: Classification,
}

/// Labels a prediction from its interval; no interval means indeterminate.
pub fn classify_prediction(prediction: &Prediction) -> Classification {
    match (prediction.ci_low, prediction.ci_high) {
        (Some(lo), Some(hi)) => classify(lo, hi),
        _ => Classification::Indeterminate,
    }
}

fn slope_contribution(beta: &DVector<f64>, z1: &[f64], z2: &[f64]) -> f64 {
    let p1 = z1.len();
    let s1: f64 = z1.iter().enumerate().map(|(a, z)| beta[1 + a] * z).sum();
    let s2: f64 = z2.iter().enumerate().map(|(b, z)| beta[1 + p1 + b] * z).sum();
    s1 + s2
}

fn value(beta: &DVector<f64>, correction: f64, z1: &[f64], z2: &[f64], link: &Link, convention: Convention) -> f64 {
    let slopes = slope_contribution(beta, z1, z2);
    match convention {
        Convention::WithIntercept => correction + beta[0] + slopes,
        Convention::SlopesOnly => correction + slopes,
        Convention::Model => link.mu(beta[0] + slopes),
    }
}

fn check_inputs(fit: &FitResult, z1: &[f64], z2: &[f64], link: &Link, convention: Convention) -> Result<()> {
    if !fit.converged {
        return Err(Error::UnconvergedFit);
    }
    let p = fit.beta.len();
    if 1 + z1.len() + z2.len() != p {
        return Err(Error::DimensionMismatch {
            what: "covariate profile",
            expected: p - 1,
            actual: z1.len() + z2.len(),
        });
    }
    if convention != Convention::Model && !link.is_identity() {
        return Err(Error::NonIdentityLink(link.name().to_string()));
    }
    Ok(())
}

/// Point prediction for profile `(z1, z2)`; never clamped.
pub fn predict_probability(
    fit: &FitResult,
    correction: f64,
    z1: &[f64],
    z2: &[f64],
    link: &Link,
    convention: Convention,
) -> Result<f64> {
    check_inputs(fit, z1, z2, link, convention)?;
    Ok(value(&fit.beta, correction, z1, z2, link, convention))
}

/// Everything needed to predict with bootstrap intervals.
#[derive(Debug, Clone)]
pub struct Predictor<'a> {
    pub fit: &'a FitResult,
    pub correction: f64,
    pub link: &'a Link,
    pub convention: Convention,
    /// Bootstrap replicates of β̂.
    pub replicates: &'a [DVector<f64>],
    pub method: TestMethod,
    pub alpha: f64,
}

impl Predictor<'_> {
    /// Point estimate with a bootstrap interval. The correction term is held
    /// fixed; for the additive conventions only the slope part varies.
    pub fn predict(&self, z1: &[f64], z2: &[f64]) -> Result<Prediction> {
        check_inputs(self.fit, z1, z2, self.link, self.convention)?;
        let point = value(&self.fit.beta, self.correction, z1, z2, self.link, self.convention);
        let centered: Vec<f64> = self
            .replicates
            .iter()
            .map(|b| match self.convention {
                Convention::Model => value(b, self.correction, z1, z2, self.link, self.convention) - point,
                _ => slope_contribution(b, z1, z2) - slope_contribution(&self.fit.beta, z1, z2),
            })
            .collect();
        let (ci_low, ci_high) = if centered.is_empty() {
            (None, None)
        } else {
            let reference = ReferenceDistribution::from_centered(&centered, self.alpha)?;
            match reference.decide(self.method, point).ci {
                Some((lo, hi)) => (Some(lo), Some(hi)),
                None => (None, None),
            }
        };
        let mut prediction = Prediction {
            z1: z1.to_vec(),
            z2: z2.to_vec(),
            point,
            ci_low,
            ci_high,
            out_of_range: !(0.0..=1.0).contains(&point),
            classification: Classification::Indeterminate,
        };
        prediction.classification = classify_prediction(&prediction);
        Ok(prediction)
    }

    /// Predictions for many profiles, in input order.
    pub fn predict_batch(&self, profiles: &[(Vec<f64>, Vec<f64>)], exec: Execution) -> Result<Vec<Prediction>> {
        map_indexed(profiles.len(), exec, |i| self.predict(&profiles[i].0, &profiles[i].1))
            .into_iter()
            .collect()
    }
}
