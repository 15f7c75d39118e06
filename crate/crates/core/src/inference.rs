//! Subject-level bootstrap of the whole fitting pipeline and the four
//! bootstrap tests for a single coefficient.
//!
//! Replicate `b` draws its resample from [`stream_rng`]`(seed, b)`, so an
//! ensemble depends only on the data, the replicate count and the seed.

use nalgebra::DVector;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, stream_rng, Execution};
use crate::gee::{fit_coefficients, FitResult, ModelSpec};
use crate::sim::Scenario;
use crate::stats;
use crate::survival::TwoSampleDataset;

/// Replicate count used when none is given.
pub const DEFAULT_REPLICATES: usize = 2000;

/// Failure share above which a bootstrap is flagged unreliable.
pub const UNRELIABLE_FAILURE_RATE: f64 = 0.05;

/// Normal-consistency factor for the IQR.
pub const IQR_DIVISOR: f64 = 1.349;

/// Normal-consistency factor for the MAD, 1/Φ⁻¹(0.75).
pub const MAD_FACTOR: f64 = 1.4826;

fn draw_indices<R: Rng + ?Sized>(rng: &mut R, n1: usize, n2: usize) -> (Vec<usize>, Vec<usize>) {
    let idx1 = (0..n1).map(|_| rng.random_range(0..n1)).collect();
    let idx2 = (0..n2).map(|_| rng.random_range(0..n2)).collect();
    (idx1, idx2)
}

/// Within-group resample indices for replicate `b`.
pub fn resample_indices(seed: u64, b: usize, n1: usize, n2: usize) -> (Vec<usize>, Vec<usize>) {
    draw_indices(&mut stream_rng(seed, b as u64), n1, n2)
}

/// Successful replicate values with their indices, plus failures.
#[derive(Debug, Clone)]
pub struct Replicates<T> {
    pub values: Vec<(usize, T)>,
    pub failed: Vec<(usize, Error)>,
}

/// Applies `f` to `count` bootstrap resamples of `data`.
pub fn bootstrap_map<T, F>(data: &TwoSampleDataset, count: usize, seed: u64, exec: Execution, f: F) -> Replicates<T>
where
    T: Send,
    F: Fn(&TwoSampleDataset) -> Result<T> + Sync + Send,
{
    let outcomes = map_indexed(count, exec, |b| {
        let (idx1, idx2) = resample_indices(seed, b, data.n1(), data.n2());
        data.resample(&idx1, &idx2).and_then(|d| f(&d))
    });
    let mut values = Vec::with_capacity(count);
    let mut failed = Vec::new();
    for (b, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(v) => values.push((b, v)),
            Err(e) => failed.push((b, e)),
        }
    }
    Replicates { values, failed }
}

/// Bootstrap replicates of β̂ around a base fit.
#[derive(Debug, Clone)]
pub struct BootstrapEnsemble {
    base_fit: FitResult,
    seed: u64,
    requested: usize,
    replicates: Vec<DVector<f64>>,
    replicate_ids: Vec<usize>,
    failed: usize,
}

impl BootstrapEnsemble {
    pub fn base_fit(&self) -> &FitResult {
        &self.base_fit
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of replicates asked for.
    pub fn requested(&self) -> usize {
        self.requested
    }

    /// Successful replicates in replicate order.
    pub fn replicates(&self) -> &[DVector<f64>] {
        &self.replicates
    }

    /// Replicate index of each successful replicate.
    pub fn replicate_ids(&self) -> &[usize] {
        &self.replicate_ids
    }

    pub fn failed(&self) -> usize {
        self.failed
    }

    pub fn failure_rate(&self) -> f64 {
        self.failed as f64 / self.requested as f64
    }

    pub fn is_unreliable(&self) -> bool {
        self.failure_rate() > UNRELIABLE_FAILURE_RATE
    }

    /// β̂* − β̂ for every successful replicate.
    pub fn centered(&self) -> Vec<DVector<f64>> {
        self.replicates.iter().map(|r| r - &self.base_fit.beta).collect()
    }

    /// Replicate values of coefficient `j`.
    pub fn coefficient(&self, j: usize) -> Vec<f64> {
        self.replicates.iter().map(|r| r[j]).collect()
    }
}

/// Refits the model on `replicates` subject-level resamples.
pub fn bootstrap(data: &TwoSampleDataset, spec: &ModelSpec, replicates: usize, seed: u64) -> Result<BootstrapEnsemble> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("bootstrap needs at least one replicate".into()));
    }
    let base_fit = fit_coefficients(data, spec)?.result;
    let inner = ModelSpec {
        exec: Execution::Sequential,
        ..spec.clone()
    };
    let reps = bootstrap_map(data, replicates, seed, spec.exec, |d| {
        fit_coefficients(d, &inner).map(|f| f.result.beta)
    });
    if reps.values.is_empty() {
        return Err(Error::AllReplicatesFailed { requested: replicates });
    }
    let (replicate_ids, replicates_ok): (Vec<usize>, Vec<DVector<f64>>) = reps.values.into_iter().unzip();
    Ok(BootstrapEnsemble {
        base_fit,
        seed,
        requested: replicates,
        replicates: replicates_ok,
        replicate_ids,
        failed: reps.failed.len(),
    })
}

/// One of the four bootstrap tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    /// Sample standard deviation of the replicates.
    Emp,
    /// Interquartile range over 1.349.
    Iqr,
    /// Median absolute deviation times 1.4826.
    Mad,
    /// Percentile method on centered replicates.
    Quantile,
}

impl TestMethod {
    pub const ALL: [TestMethod; 4] = [TestMethod::Emp, TestMethod::Iqr, TestMethod::Mad, TestMethod::Quantile];

    pub fn name(self) -> &'static str {
        match self {
            TestMethod::Emp => "emp",
            TestMethod::Iqr => "iqr",
            TestMethod::Mad => "mad",
            TestMethod::Quantile => "quantile",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(name))
    }
}

impl std::fmt::Display for TestMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Scales and quantiles of a centered bootstrap distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDistribution {
    pub emp: f64,
    pub iqr: f64,
    pub mad: f64,
    /// q*_{α/2} of the centered replicates.
    pub q_low: f64,
    /// q*_{1−α/2} of the centered replicates.
    pub q_high: f64,
    pub alpha: f64,
    /// z_{1−α/2}.
    pub z: f64,
    pub count: usize,
}

/// Result of one test for one estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodOutcome {
    pub method: TestMethod,
    /// σ̂* for the scale methods; `None` for the percentile method or when undefined.
    pub scale: Option<f64>,
    /// `None` when the test is undefined (zero or missing scale).
    pub reject: Option<bool>,
    pub ci: Option<(f64, f64)>,
}

impl ReferenceDistribution {
    pub fn from_centered(centered: &[f64], alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if centered.is_empty() {
            return Err(Error::InvalidParameter("no bootstrap replicates".into()));
        }
        let sorted = stats::sorted(centered);
        let med = stats::quantile_sorted(&sorted, 0.5);
        let deviations: Vec<f64> = sorted.iter().map(|x| (x - med).abs()).collect();
        Ok(Self {
            emp: stats::sample_sd(centered),
            iqr: (stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25)).abs() / IQR_DIVISOR,
            mad: stats::median(&deviations) * MAD_FACTOR,
            q_low: stats::quantile_sorted(&sorted, alpha / 2.0),
            q_high: stats::quantile_sorted(&sorted, 1.0 - alpha / 2.0),
            alpha,
            z: stats::normal_quantile(1.0 - alpha / 2.0),
            count: centered.len(),
        })
    }

    /// σ̂* for a scale method when it is finite and positive.
    pub fn scale(&self, method: TestMethod) -> Option<f64> {
        let s = match method {
            TestMethod::Emp => self.emp,
            TestMethod::Iqr => self.iqr,
            TestMethod::Mad => self.mad,
            TestMethod::Quantile => return None,
        };
        (s.is_finite() && s > 0.0).then_some(s)
    }

    pub fn decide(&self, method: TestMethod, estimate: f64) -> MethodOutcome {
        if method == TestMethod::Quantile {
            return MethodOutcome {
                method,
                scale: None,
                reject: Some(estimate < self.q_low || estimate > self.q_high),
                ci: Some((estimate - self.q_high, estimate - self.q_low)),
            };
        }
        match self.scale(method) {
            Some(s) => MethodOutcome {
                method,
                scale: Some(s),
                reject: Some(estimate.abs() / s > self.z),
                ci: Some((estimate - self.z * s, estimate + self.z * s)),
            },
            None => MethodOutcome {
                method,
                scale: None,
                reject: None,
                ci: None,
            },
        }
    }

    pub fn decide_all(&self, estimate: f64) -> Vec<MethodOutcome> {
        TestMethod::ALL.iter().map(|&m| self.decide(m, estimate)).collect()
    }
}

/// All four tests of H0: β_j = 0 for one coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub coefficient: usize,
    pub estimate: f64,
    pub alpha: f64,
    pub outcomes: Vec<MethodOutcome>,
    pub replicates_used: usize,
    pub failed: usize,
    pub unreliable: bool,
}

impl TestReport {
    pub fn outcome(&self, method: TestMethod) -> &MethodOutcome {
        self.outcomes
            .iter()
            .find(|o| o.method == method)
            .expect("every method is reported")
    }
}

/// Tests coefficient `j` of the base fit against its bootstrap distribution.
pub fn test_coefficient(ensemble: &BootstrapEnsemble, j: usize, alpha: f64) -> Result<TestReport> {
    let p = ensemble.base_fit.beta.len();
    if j >= p {
        return Err(Error::IndexOutOfRange { index: j, len: p });
    }
    let estimate = ensemble.base_fit.beta[j];
    let centered: Vec<f64> = ensemble.coefficient(j).iter().map(|b| b - estimate).collect();
    let reference = ReferenceDistribution::from_centered(&centered, alpha)?;
    Ok(TestReport {
        coefficient: j,
        estimate,
        alpha,
        outcomes: reference.decide_all(estimate),
        replicates_used: centered.len(),
        failed: ensemble.failed,
        unreliable: ensemble.is_unreliable(),
    })
}

/// Per-dataset estimates and pooled single-replicate deviations of a
/// warp-speed simulation.
#[derive(Debug, Clone)]
pub struct WarpSpeedRun {
    pub estimates: Vec<DVector<f64>>,
    pub centered: Vec<DVector<f64>>,
    pub requested: usize,
    pub failed: usize,
}

/// Share of datasets rejecting H0: β_j = 0, per test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRates {
    pub coefficient: usize,
    pub emp: Option<f64>,
    pub iqr: Option<f64>,
    pub mad: Option<f64>,
    pub quantile: f64,
    /// Set when a pooled scale is zero, leaving scale tests undefined.
    pub degenerate: bool,
    pub valid_reps: usize,
}

impl RejectionRates {
    pub fn rate(&self, method: TestMethod) -> Option<f64> {
        match method {
            TestMethod::Emp => self.emp,
            TestMethod::Iqr => self.iqr,
            TestMethod::Mad => self.mad,
            TestMethod::Quantile => Some(self.quantile),
        }
    }
}

impl WarpSpeedRun {
    pub fn rejection_rates(&self, j: usize, alpha: f64) -> Result<RejectionRates> {
        let centered: Vec<f64> = self.centered.iter().map(|c| c[j]).collect();
        let reference = ReferenceDistribution::from_centered(&centered, alpha)?;
        let m = self.estimates.len() as f64;
        let share = |method: TestMethod| -> f64 {
            let hits = self
                .estimates
                .iter()
                .filter(|b| reference.decide(method, b[j]).reject == Some(true))
                .count();
            hits as f64 / m
        };
        let scaled = |method: TestMethod| reference.scale(method).map(|_| share(method));
        let (emp, iqr, mad) = (
            scaled(TestMethod::Emp),
            scaled(TestMethod::Iqr),
            scaled(TestMethod::Mad),
        );
        Ok(RejectionRates {
            coefficient: j,
            emp,
            iqr,
            mad,
            quantile: share(TestMethod::Quantile),
            degenerate: emp.is_none() || iqr.is_none() || mad.is_none(),
            valid_reps: self.estimates.len(),
        })
    }
}

/// Warp-speed bootstrap: each of `reps` datasets from `generate` is fitted
/// once and resampled once. Dataset `m` uses generator stream `m`.
pub fn warp_speed<G>(reps: usize, seed: u64, spec: &ModelSpec, generate: G) -> Result<WarpSpeedRun>
where
    G: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<TwoSampleDataset> + Sync + Send,
{
    let inner = ModelSpec {
        exec: Execution::Sequential,
        ..spec.clone()
    };
    let outcomes = map_indexed(reps, spec.exec, |m| -> Result<Option<(DVector<f64>, DVector<f64>)>> {
        let mut rng = stream_rng(seed, m as u64);
        let data = generate(&mut rng)?;
        let (idx1, idx2) = draw_indices(&mut rng, data.n1(), data.n2());
        let Ok(base) = fit_coefficients(&data, &inner) else {
            return Ok(None);
        };
        let resampled = data.resample(&idx1, &idx2)?;
        Ok(fit_coefficients(&resampled, &inner)
            .ok()
            .map(|rep| (base.result.beta.clone(), rep.result.beta - base.result.beta)))
    });
    let mut estimates = Vec::with_capacity(reps);
    let mut centered = Vec::with_capacity(reps);
    let mut failed = 0;
    for o in outcomes {
        match o? {
            Some((b, c)) => {
                estimates.push(b);
                centered.push(c);
            }
            None => failed += 1,
        }
    }
    if estimates.is_empty() {
        return Err(Error::AllReplicatesFailed { requested: reps });
    }
    Ok(WarpSpeedRun {
        estimates,
        centered,
        requested: reps,
        failed,
    })
}

/// Rejection rates for the first group-1 and first group-2 slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    /// Tests of β11.
    pub group1: RejectionRates,
    /// Tests of β21.
    pub group2: RejectionRates,
    pub requested: usize,
    pub failed: usize,
}

/// Warp-speed study of a simulation scenario with identity link at α = 0.05.
pub fn warp_speed_harness(scenario: &Scenario, reps: usize, seed: u64) -> Result<HarnessReport> {
    warp_speed_harness_with(scenario, reps, seed, 0.05, Execution::default())
}

pub fn warp_speed_harness_with(
    scenario: &Scenario,
    reps: usize,
    seed: u64,
    alpha: f64,
    exec: Execution,
) -> Result<HarnessReport> {
    if reps < 100 {
        return Err(Error::InvalidParameter(format!(
            "warp-speed studies need at least 100 repetitions, got {reps}"
        )));
    }
    scenario.validate()?;
    let spec = ModelSpec {
        exec,
        ..ModelSpec::default()
    };
    let run = warp_speed(reps, seed, &spec, |rng| scenario.sample_dataset(rng))?;
    let p1 = scenario.p1();
    Ok(HarnessReport {
        group1: run.rejection_rates(1, alpha)?,
        group2: run.rejection_rates(1 + p1, alpha)?,
        requested: reps,
        failed: run.failed,
    })
}
