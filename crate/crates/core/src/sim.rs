//! Weibull simulation design: covariate laws, event and censoring times,
//! the closed-form true effect for equal shapes, and a scenario runner that
//! emits rejection-rate rows.

use std::fmt;

use nalgebra::{Matrix2, Vector2};
use rand::distr::Open01;
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, stream_rng, Execution};
use crate::gee::ModelSpec;
use crate::inference::{bootstrap, test_coefficient, warp_speed, RejectionRates, TestMethod, DEFAULT_REPLICATES};
use crate::survival::{CensoringMode, Observation, TwoSampleDataset};

/// Variance of Z21 in the two-covariate group-2 design.
pub const Z21_VARIANCE: f64 = 1.2;

/// Upper bounds of the uniform censoring laws for groups 1 and 2.
pub const CENSOR_BOUNDS: (f64, f64) = (10.0, 15.0);

/// Covariate laws for one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateDesign {
    /// Z1 ~ N(0,1), Z2 ~ Bin(1, 0.5 + 0.1 sign Z1).
    Group1P2,
    /// Z1 ~ N(0, 1.2), Z2 ~ Bin(1, 0.7 − 0.05 sign Z1).
    Group2P2,
    /// (Z1, Z2) ~ N2(0, [[1, .2], [.2, 1]]), Z3 ~ Bin(1, .4), Z4 ~ Bin(1, .6).
    Group1P4,
    /// (Z1, Z2) ~ N2(0, [[1.1, .3], [.3, 1.1]]), Z3, Z4 ~ Bin(1, 0.5 + 0.1 sign Z1).
    Group2P4,
}

impl CovariateDesign {
    pub fn dim(self) -> usize {
        match self {
            CovariateDesign::Group1P2 | CovariateDesign::Group2P2 => 2,
            CovariateDesign::Group1P4 | CovariateDesign::Group2P4 => 4,
        }
    }

    /// Design for `group` (1 or 2) with `p` covariates.
    pub fn for_group(group: u8, p: usize) -> Option<Self> {
        match (group, p) {
            (1, 2) => Some(CovariateDesign::Group1P2),
            (2, 2) => Some(CovariateDesign::Group2P2),
            (1, 4) => Some(CovariateDesign::Group1P4),
            (2, 4) => Some(CovariateDesign::Group2P4),
            _ => None,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> f64 {
    if rng.random_bool(p) {
        1.0
    } else {
        0.0
    }
}

fn bivariate_normal<R: Rng + ?Sized>(rng: &mut R, chol: &Matrix2<f64>) -> (f64, f64) {
    let e = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    let z = chol * e;
    (z[0], z[1])
}

fn cholesky(var: f64, cov: f64) -> Matrix2<f64> {
    Matrix2::new(var, cov, cov, var)
        .cholesky()
        .expect("covariance matrices are positive definite")
        .l()
}

/// Draws `n` covariate rows.
pub fn gen_covariates<R: Rng + ?Sized>(design: CovariateDesign, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    match design {
        CovariateDesign::Group1P2 => (0..n)
            .map(|_| {
                let z1: f64 = rng.sample(StandardNormal);
                vec![z1, bernoulli(rng, 0.5 + 0.1 * sign(z1))]
            })
            .collect(),
        CovariateDesign::Group2P2 => (0..n)
            .map(|_| {
                let z1 = Z21_VARIANCE.sqrt() * rng.sample::<f64, _>(StandardNormal);
                vec![z1, bernoulli(rng, 0.7 - 0.05 * sign(z1))]
            })
            .collect(),
        CovariateDesign::Group1P4 => {
            let l = cholesky(1.0, 0.2);
            (0..n)
                .map(|_| {
                    let (z1, z2) = bivariate_normal(rng, &l);
                    vec![z1, z2, bernoulli(rng, 0.4), bernoulli(rng, 0.6)]
                })
                .collect()
        }
        CovariateDesign::Group2P4 => {
            let l = cholesky(1.1, 0.3);
            (0..n)
                .map(|_| {
                    let (z1, z2) = bivariate_normal(rng, &l);
                    let p = 0.5 + 0.1 * sign(z1);
                    vec![z1, z2, bernoulli(rng, p), bernoulli(rng, p)]
                })
                .collect()
        }
    }
}

/// Weibull scale λ = exp(γ0 + γᵀz).
pub fn weibull_scale(gamma0: f64, gamma: &[f64], z: &[f64]) -> f64 {
    (gamma0 + gamma.iter().zip(z).map(|(g, z)| g * z).sum::<f64>()).exp()
}

/// S(t) = exp(−(t/λ)^k).
pub fn weibull_survival(t: f64, lambda: f64, k: f64) -> f64 {
    (-(t / lambda).powf(k)).exp()
}

/// h(t) = (k/λ)(t/λ)^{k−1}.
pub fn weibull_hazard(t: f64, lambda: f64, k: f64) -> f64 {
    k / lambda * (t / lambda).powf(k - 1.0)
}

/// Positive time at which two Weibull hazards with different shapes cross.
pub fn hazard_crossing_time(lambda1: f64, k1: f64, lambda2: f64, k2: f64) -> Result<f64> {
    if k1 == k2 {
        return Err(Error::InvalidParameter(
            "hazards with equal shapes are proportional".into(),
        ));
    }
    let ratio = k1 * lambda2.powf(k2) / (k2 * lambda1.powf(k1));
    Ok(ratio.powf(1.0 / (k2 - k1)))
}

/// Inverse-transform Weibull event times T = λ(−ln U)^{1/k}.
pub fn gen_event_times<R: Rng + ?Sized>(
    gamma0: f64,
    gamma: &[f64],
    k: f64,
    covariates: &[Vec<f64>],
    rng: &mut R,
) -> Vec<f64> {
    covariates
        .iter()
        .map(|z| {
            let u: f64 = rng.sample(Open01);
            weibull_scale(gamma0, gamma, z) * (-u.ln()).powf(1.0 / k)
        })
        .collect()
}

/// Uniform censoring times on `[0, bound]`.
pub fn gen_censoring<R: Rng + ?Sized>(bound: f64, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| bound * rng.random::<f64>()).collect()
}

/// Closed-form θ(τ) for Weibull groups sharing shape `k`:
/// (1 − S1(τ)S2(τ)) λ1ᵏ/(λ1ᵏ + λ2ᵏ), logistic in the linear predictors at τ = ∞.
#[allow(clippy::too_many_arguments)]
pub fn true_theta_weibull_equal_shapes(
    gamma10: f64,
    gamma1: &[f64],
    z1: &[f64],
    gamma20: f64,
    gamma2: &[f64],
    z2: &[f64],
    k1: f64,
    k2: f64,
    tau: f64,
) -> Result<f64> {
    if k1 != k2 {
        return Err(Error::UnequalShapes { k1, k2 });
    }
    let k = k1;
    let eta1 = gamma10 + gamma1.iter().zip(z1).map(|(g, z)| g * z).sum::<f64>();
    let eta2 = gamma20 + gamma2.iter().zip(z2).map(|(g, z)| g * z).sum::<f64>();
    let logistic = 1.0 / (1.0 + (-k * (eta1 - eta2)).exp());
    if tau == f64::INFINITY {
        return Ok(logistic);
    }
    let (l1, l2) = (eta1.exp(), eta2.exp());
    Ok((1.0 - weibull_survival(tau, l1, k) * weibull_survival(tau, l2, k)) * logistic)
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioId {
    I,
    Ii,
    Iii,
    Iv,
}

impl ScenarioId {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Some(ScenarioId::I),
            "ii" | "2" => Some(ScenarioId::Ii),
            "iii" | "3" => Some(ScenarioId::Iii),
            "iv" | "4" => Some(ScenarioId::Iv),
            _ => None,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioId::I => "i",
            ScenarioId::Ii => "ii",
            ScenarioId::Iii => "iii",
            ScenarioId::Iv => "iv",
        })
    }
}

/// Weibull shape pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    /// k1 = 2, k2 = 3.
    I,
    /// k1 = k2 = 3.
    II,
}

impl Setting {
    pub fn shapes(self) -> (f64, f64) {
        match self {
            Setting::I => (2.0, 3.0),
            Setting::II => (3.0, 3.0),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Some(Setting::I),
            "II" | "2" => Some(Setting::II),
            _ => None,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::I => "I",
            Setting::II => "II",
        })
    }
}

/// Full description of a two-group Weibull data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub scenario_id: Option<ScenarioId>,
    #[serde(default)]
    pub setting: Option<Setting>,
    pub gamma10: f64,
    pub gamma20: f64,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub k1: f64,
    pub k2: f64,
    pub design1: CovariateDesign,
    pub design2: CovariateDesign,
    /// Uniform censoring bounds; `None` for uncensored data.
    #[serde(default)]
    pub censor_bounds: Option<(f64, f64)>,
    pub n1: usize,
    pub n2: usize,
}

impl Scenario {
    /// One of the four named parameter sets under a shape setting.
    pub fn named(id: ScenarioId, setting: Setting, n1: usize, n2: usize, censored: bool) -> Self {
        let (p, gamma1, gamma2) = match id {
            ScenarioId::I => (2, vec![0.0, 0.0], vec![0.0, 0.0]),
            ScenarioId::Ii => (2, vec![0.2, 0.0], vec![0.0, 0.5]),
            ScenarioId::Iii => (4, vec![0.0; 4], vec![0.0; 4]),
            ScenarioId::Iv => (4, vec![0.0, 0.2, 0.4, 0.6], vec![-0.2, 0.4, -0.6, 0.0]),
        };
        let (k1, k2) = setting.shapes();
        Self {
            scenario_id: Some(id),
            setting: Some(setting),
            gamma10: 0.0,
            gamma20: 0.0,
            gamma1,
            gamma2,
            k1,
            k2,
            design1: CovariateDesign::for_group(1, p).expect("p is 2 or 4"),
            design2: CovariateDesign::for_group(2, p).expect("p is 2 or 4"),
            censor_bounds: censored.then_some(CENSOR_BOUNDS),
            n1,
            n2,
        }
    }

    pub fn p1(&self) -> usize {
        self.design1.dim()
    }

    pub fn p2(&self) -> usize {
        self.design2.dim()
    }

    pub fn is_censored(&self) -> bool {
        self.censor_bounds.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma1.len() != self.p1() {
            return Err(Error::DimensionMismatch {
                what: "gamma1",
                expected: self.p1(),
                actual: self.gamma1.len(),
            });
        }
        if self.gamma2.len() != self.p2() {
            return Err(Error::DimensionMismatch {
                what: "gamma2",
                expected: self.p2(),
                actual: self.gamma2.len(),
            });
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::InvalidParameter("Weibull shapes must be positive".into()));
        }
        if let Some((b1, b2)) = self.censor_bounds {
            if !(b1 > 0.0 && b2 > 0.0) {
                return Err(Error::InvalidParameter("censoring bounds must be positive".into()));
            }
        }
        if self.n1 < 2 || self.n2 < 2 {
            return Err(Error::InvalidParameter("both groups need at least two subjects".into()));
        }
        Ok(())
    }

    /// Short label such as `ii/I/(50,50)/uncensored`.
    pub fn label(&self) -> String {
        format!(
            "{}/{}/({},{})/{}",
            self.scenario_id.map_or("custom".to_string(), |s| s.to_string()),
            self.setting.map_or("-".to_string(), |s| s.to_string()),
            self.n1,
            self.n2,
            if self.is_censored() { "censored" } else { "uncensored" }
        )
    }

    fn group_params(&self, group: u8) -> (f64, &[f64], f64, CovariateDesign, Option<f64>) {
        match group {
            1 => (
                self.gamma10,
                &self.gamma1,
                self.k1,
                self.design1,
                self.censor_bounds.map(|b| b.0),
            ),
            _ => (
                self.gamma20,
                &self.gamma2,
                self.k2,
                self.design2,
                self.censor_bounds.map(|b| b.1),
            ),
        }
    }

    /// Draws `n` observations for `group` (1 or 2).
    pub fn sample_group<R: Rng + ?Sized>(&self, group: u8, n: usize, rng: &mut R) -> Vec<Observation> {
        let (g0, g, k, design, bound) = self.group_params(group);
        let z = gen_covariates(design, n, rng);
        let t = gen_event_times(g0, g, k, &z, rng);
        let c = match bound {
            Some(b) => gen_censoring(b, n, rng),
            None => vec![f64::INFINITY; n],
        };
        z.into_iter()
            .zip(t)
            .zip(c)
            .map(|((z, t), c)| Observation::new(t.min(c), t <= c, z))
            .collect()
    }

    /// Draws one dataset with τ = ∞.
    pub fn sample_dataset<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TwoSampleDataset> {
        let g1 = self.sample_group(1, self.n1, rng);
        let g2 = self.sample_group(2, self.n2, rng);
        let mode = if self.is_censored() {
            CensoringMode::Censored
        } else {
            CensoringMode::Uncensored
        };
        TwoSampleDataset::new(g1, g2, f64::INFINITY, mode)
    }
}

/// Share of censored subjects among `n` draws from `group`.
pub fn censoring_rate<R: Rng + ?Sized>(scenario: &Scenario, group: u8, n: usize, rng: &mut R) -> f64 {
    let obs = scenario.sample_group(group, n, rng);
    obs.iter().filter(|o| !o.event).count() as f64 / n as f64
}

/// How each Monte Carlo dataset is bootstrapped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapMode {
    /// One replicate per dataset, pooled across datasets.
    #[default]
    WarpSpeed,
    /// A full bootstrap of `replicates` per dataset.
    Full { replicates: usize },
}

/// Rejection rates of one scenario run, laid out as a table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: String,
    pub setting: String,
    pub n1: usize,
    pub n2: usize,
    pub censored: bool,
    pub group1: RejectionRates,
    pub group2: RejectionRates,
    pub reps: usize,
    pub failed: usize,
}

fn pct(rate: Option<f64>) -> String {
    rate.map_or_else(|| "NA".to_string(), |r| format!("{:.1}", 100.0 * r))
}

impl ScenarioRow {
    pub const CSV_HEADER: &'static str = "scenario,setting,n1,n2,censoring,\
h1_emp,h1_iqr,h1_mad,h1_quantile,h2_emp,h2_iqr,h2_mad,h2_quantile,reps,failed";

    /// Rates in percent with one decimal; `NA` for undefined tests.
    pub fn to_csv(&self) -> String {
        let rates = |r: &RejectionRates| {
            TestMethod::ALL
                .iter()
                .map(|&m| pct(r.rate(m)))
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.setting,
            self.n1,
            self.n2,
            if self.censored { "yes" } else { "no" },
            rates(&self.group1),
            rates(&self.group2),
            self.reps,
            self.failed
        )
    }
}

/// Row plus per-dataset estimates for plotting.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub row: ScenarioRow,
    /// β̂ of every successfully fitted dataset, in repetition order.
    pub estimates: Vec<Vec<f64>>,
}

/// Runs `reps` Monte Carlo repetitions with identity link, τ = ∞, α = 0.05.
pub fn run_scenario(scenario: &Scenario, reps: usize, mode: BootstrapMode, seed: u64) -> Result<ScenarioOutcome> {
    run_scenario_with(scenario, reps, mode, seed, 0.05, Execution::default())
}

pub fn run_scenario_with(
    scenario: &Scenario,
    reps: usize,
    mode: BootstrapMode,
    seed: u64,
    alpha: f64,
    exec: Execution,
) -> Result<ScenarioOutcome> {
    scenario.validate()?;
    if reps == 0 {
        return Err(Error::InvalidParameter("at least one repetition is required".into()));
    }
    let (j1, j2) = (1, 1 + scenario.p1());
    let spec = ModelSpec {
        exec,
        ..ModelSpec::default()
    };
    let (group1, group2, failed, estimates) = match mode {
        BootstrapMode::WarpSpeed => {
            let run = warp_speed(reps, seed, &spec, |rng| scenario.sample_dataset(rng))?;
            (
                run.rejection_rates(j1, alpha)?,
                run.rejection_rates(j2, alpha)?,
                run.failed,
                run.estimates.iter().map(|b| b.iter().copied().collect()).collect(),
            )
        }
        BootstrapMode::Full { replicates } => {
            full_bootstrap_rates(scenario, reps, replicates, seed, alpha, exec, j1, j2)?
        }
    };
    Ok(ScenarioOutcome {
        row: ScenarioRow {
            scenario: scenario.scenario_id.map_or("custom".into(), |s| s.to_string()),
            setting: scenario.setting.map_or("-".into(), |s| s.to_string()),
            n1: scenario.n1,
            n2: scenario.n2,
            censored: scenario.is_censored(),
            group1,
            group2,
            reps,
            failed,
        },
        estimates,
    })
}

type RatesAndEstimates = (RejectionRates, RejectionRates, usize, Vec<Vec<f64>>);

#[allow(clippy::too_many_arguments)]
fn full_bootstrap_rates(
    scenario: &Scenario,
    reps: usize,
    replicates: usize,
    seed: u64,
    alpha: f64,
    exec: Execution,
    j1: usize,
    j2: usize,
) -> Result<RatesAndEstimates> {
    let replicates = if replicates == 0 {
        DEFAULT_REPLICATES
    } else {
        replicates
    };
    let inner = ModelSpec {
        exec: Execution::Sequential,
        ..ModelSpec::default()
    };
    let outcomes = map_indexed(reps, exec, |m| -> Result<Option<_>> {
        let mut rng = stream_rng(seed, m as u64);
        let data = scenario.sample_dataset(&mut rng)?;
        let boot_seed: u64 = rng.random();
        let Ok(ens) = bootstrap(&data, &inner, replicates, boot_seed) else {
            return Ok(None);
        };
        let r1 = test_coefficient(&ens, j1, alpha)?;
        let r2 = test_coefficient(&ens, j2, alpha)?;
        Ok(Some((
            ens.base_fit().beta.iter().copied().collect::<Vec<f64>>(),
            r1,
            r2,
        )))
    });
    let mut estimates = Vec::new();
    let mut reports = Vec::new();
    let mut failed = 0;
    for o in outcomes {
        match o? {
            Some((b, r1, r2)) => {
                estimates.push(b);
                reports.push((r1, r2));
            }
            None => failed += 1,
        }
    }
    if reports.is_empty() {
        return Err(Error::AllReplicatesFailed { requested: reps });
    }
    let tally = |pick: &dyn Fn(
        &(crate::inference::TestReport, crate::inference::TestReport),
    ) -> &crate::inference::TestReport,
                 j: usize| {
        let rate = |method: TestMethod| -> Option<f64> {
            let decided: Vec<bool> = reports.iter().filter_map(|r| pick(r).outcome(method).reject).collect();
            (!decided.is_empty()).then(|| decided.iter().filter(|&&x| x).count() as f64 / decided.len() as f64)
        };
        let (emp, iqr, mad) = (rate(TestMethod::Emp), rate(TestMethod::Iqr), rate(TestMethod::Mad));
        RejectionRates {
            coefficient: j,
            emp,
            iqr,
            mad,
            quantile: rate(TestMethod::Quantile).unwrap_or(0.0),
            degenerate: emp.is_none() || iqr.is_none() || mad.is_none(),
            valid_reps: reports.len(),
        }
    };
    let g1 = tally(&|r| &r.0, j1);
    let g2 = tally(&|r| &r.1, j2);
    Ok((g1, g2, failed, estimates))
}
