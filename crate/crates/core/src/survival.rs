//! Step-function survival curves and the Kaplan–Meier estimator.
//!
//! Curves are right-continuous, start at 1 and are carried flat beyond the
//! last jump. Tied times are grouped by exact floating-point equality; events
//! at a tied time are processed against a risk set that still contains the
//! subjects censored at that time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject: observed time, event indicator and covariate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    /// `true` when the event was observed, `false` when right-censored.
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl Observation {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event,
            covariates,
        }
    }

    /// An uncensored observation without covariates.
    pub fn event_at(time: f64) -> Self {
        Self::new(time, true, Vec::new())
    }

    /// A censored observation without covariates.
    pub fn censored_at(time: f64) -> Self {
        Self::new(time, false, Vec::new())
    }
}

/// Whether event indicators are taken from the data or forced to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CensoringMode {
    /// Times must be non-negative; status flags are honoured.
    #[default]
    Censored,
    /// Every status is set to 1 and times may be any finite real.
    Uncensored,
}

/// Right-continuous, non-increasing step function with value 1 before the
/// first jump.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    jump_times: Vec<f64>,
    values: Vec<f64>,
}

impl SurvivalCurve {
    /// Builds a curve from its jump times and post-jump values.
    pub fn new(jump_times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::InvalidCurve(format!(
                "{} jump times but {} values",
                jump_times.len(),
                values.len()
            )));
        }
        if jump_times.iter().any(|t| t.is_nan()) {
            return Err(Error::InvalidCurve("jump time is NaN".into()));
        }
        if jump_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidCurve("jump times must be strictly increasing".into()));
        }
        let mut prev = 1.0;
        for &v in &values {
            if !(0.0..=1.0).contains(&v) || v > prev {
                return Err(Error::InvalidCurve(format!(
                    "values must be non-increasing in [0, 1], found {v} after {prev}"
                )));
            }
            prev = v;
        }
        Ok(Self { jump_times, values })
    }

    /// The curve that never drops below 1.
    pub fn flat() -> Self {
        Self {
            jump_times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_jumps(&self) -> usize {
        self.jump_times.len()
    }

    /// S(t), taking the post-jump value at a jump time.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&x| x <= t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// S(t−), the value just before `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&x| x < t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// Iterates `(time, S(t−) − S(t))` over all jumps.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut prev = 1.0;
        self.jump_times.iter().zip(&self.values).map(move |(&t, &v)| {
            let size = prev - v;
            prev = v;
            (t, size)
        })
    }
}

/// Free-function form of [`SurvivalCurve::left_limit`].
pub fn left_limit(curve: &SurvivalCurve, t: f64) -> f64 {
    curve.left_limit(t)
}

/// Observations sorted by time, kept for repeated leave-one-out refits.
struct SortedSample {
    times: Vec<f64>,
    events: Vec<bool>,
    /// `rank[i]` is the sorted position of original observation `i`.
    rank: Vec<usize>,
}

impl SortedSample {
    fn new(sample: &[Observation]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(index) = sample.iter().position(|o| !o.time.is_finite()) {
            return Err(Error::InvalidObservation {
                index,
                reason: "time must be finite".into(),
            });
        }
        let mut order: Vec<usize> = (0..sample.len()).collect();
        order.sort_by(|&a, &b| sample[a].time.total_cmp(&sample[b].time));
        let mut rank = vec![0; sample.len()];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = pos;
        }
        Ok(Self {
            times: order.iter().map(|&i| sample[i].time).collect(),
            events: order.iter().map(|&i| sample[i].event).collect(),
            rank,
        })
    }

    /// Product-limit curve, optionally skipping one sorted position.
    fn curve(&self, skip: Option<usize>) -> SurvivalCurve {
        let n = self.times.len();
        let mut at_risk = n - usize::from(skip.is_some());
        let mut surv = 1.0;
        let mut jump_times = Vec::new();
        let mut values = Vec::new();
        let mut i = 0;
        while i < n {
            let t = self.times[i];
            let mut deaths = 0usize;
            let mut leaving = 0usize;
            while i < n && self.times[i] == t {
                if Some(i) != skip {
                    leaving += 1;
                    deaths += usize::from(self.events[i]);
                }
                i += 1;
            }
            if deaths > 0 {
                surv *= 1.0 - deaths as f64 / at_risk as f64;
                jump_times.push(t);
                values.push(surv);
            }
            at_risk -= leaving;
        }
        SurvivalCurve { jump_times, values }
    }
}

/// Kaplan–Meier estimate of the survival function of `sample`.
pub fn kaplan_meier(sample: &[Observation]) -> Result<SurvivalCurve> {
    Ok(SortedSample::new(sample)?.curve(None))
}

/// Kaplan–Meier estimate with observation `index` removed.
pub fn leave_one_out_km(sample: &[Observation], index: usize) -> Result<SurvivalCurve> {
    if sample.len() < 2 {
        return Err(Error::SampleTooSmall {
            group: 0,
            size: sample.len(),
            required: 2,
        });
    }
    if index >= sample.len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: sample.len(),
        });
    }
    let sorted = SortedSample::new(sample)?;
    Ok(sorted.curve(Some(sorted.rank[index])))
}

/// The full curve followed by every leave-one-out curve, in subject order.
///
/// Sorts once and reuses the ordering for each refit.
pub fn km_with_leave_one_out(sample: &[Observation]) -> Result<(SurvivalCurve, Vec<SurvivalCurve>)> {
    if sample.len() < 2 {
        return Err(Error::SampleTooSmall {
            group: 0,
            size: sample.len(),
            required: 2,
        });
    }
    let sorted = SortedSample::new(sample)?;
    let full = sorted.curve(None);
    let loo = sorted.rank.iter().map(|&pos| sorted.curve(Some(pos))).collect();
    Ok((full, loo))
}

/// −∫_{(−∞, τ)} S1 dS2 as a Stieltjes sum over the jumps of `s2` below `tau`.
///
/// `s1` is evaluated right-continuously at each jump of `s2`, which counts
/// pairs with a strict ordering `T1 > T2`.
pub fn theta_integral(s1: &SurvivalCurve, s2: &SurvivalCurve, tau: f64) -> f64 {
    let mut sum = 0.0;
    let mut k = 0;
    let t1 = s1.jump_times();
    for (t, size) in s2.jumps() {
        if t >= tau {
            break;
        }
        while k < t1.len() && t1[k] <= t {
            k += 1;
        }
        let s1_at = if k == 0 { 1.0 } else { s1.values[k - 1] };
        sum += s1_at * size;
    }
    sum
}

/// Two independent samples plus the truncation horizon τ.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleDataset {
    group1: Vec<Observation>,
    group2: Vec<Observation>,
    tau: f64,
    p1: usize,
    p2: usize,
}

fn validate_group(group: &mut [Observation], id: usize, mode: CensoringMode) -> Result<usize> {
    if group.len() < 2 {
        return Err(Error::SampleTooSmall {
            group: id,
            size: group.len(),
            required: 2,
        });
    }
    let p = group[0].covariates.len();
    for (index, obs) in group.iter_mut().enumerate() {
        if !obs.time.is_finite() {
            return Err(Error::InvalidObservation {
                index,
                reason: format!("group {id}: time must be finite"),
            });
        }
        match mode {
            CensoringMode::Censored if obs.time < 0.0 => {
                return Err(Error::InvalidObservation {
                    index,
                    reason: format!("group {id}: negative time {} in censored mode", obs.time),
                });
            }
            CensoringMode::Uncensored => obs.event = true,
            CensoringMode::Censored => {}
        }
        if obs.covariates.len() != p {
            return Err(Error::DimensionMismatch {
                what: "covariate vector length",
                expected: p,
                actual: obs.covariates.len(),
            });
        }
        if obs.covariates.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidObservation {
                index,
                reason: format!("group {id}: covariates must be finite"),
            });
        }
    }
    Ok(p)
}

impl TwoSampleDataset {
    pub fn new(
        mut group1: Vec<Observation>,
        mut group2: Vec<Observation>,
        tau: f64,
        mode: CensoringMode,
    ) -> Result<Self> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive or +inf, got {tau}"
            )));
        }
        let p1 = validate_group(&mut group1, 1, mode)?;
        let p2 = validate_group(&mut group2, 2, mode)?;
        Ok(Self {
            group1,
            group2,
            tau,
            p1,
            p2,
        })
    }

    pub fn group1(&self) -> &[Observation] {
        &self.group1
    }

    pub fn group2(&self) -> &[Observation] {
        &self.group2
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n1(&self) -> usize {
        self.group1.len()
    }

    pub fn n2(&self) -> usize {
        self.group2.len()
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    /// Length of the design row (1, z1, z2).
    pub fn num_params(&self) -> usize {
        1 + self.p1 + self.p2
    }

    /// n1 / (n1 + n2).
    pub fn lambda(&self) -> f64 {
        self.n1() as f64 / (self.n1() + self.n2()) as f64
    }

    pub fn is_uncensored(&self) -> bool {
        self.group1.iter().chain(&self.group2).all(|o| o.event)
    }

    /// Same horizon, different τ.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive or +inf, got {tau}"
            )));
        }
        Ok(Self { tau, ..self.clone() })
    }

    /// Swaps the roles of the two groups.
    pub fn swapped(&self) -> Self {
        Self {
            group1: self.group2.clone(),
            group2: self.group1.clone(),
            tau: self.tau,
            p1: self.p2,
            p2: self.p1,
        }
    }

    /// Dataset assembled from subject indices into each group (repeats allowed).
    pub fn resample(&self, idx1: &[usize], idx2: &[usize]) -> Result<Self> {
        let pick = |group: &[Observation], idx: &[usize]| -> Result<Vec<Observation>> {
            idx.iter()
                .map(|&i| {
                    group.get(i).cloned().ok_or(Error::IndexOutOfRange {
                        index: i,
                        len: group.len(),
                    })
                })
                .collect()
        };
        let group1 = pick(&self.group1, idx1)?;
        let group2 = pick(&self.group2, idx2)?;
        for (id, g) in [(1, &group1), (2, &group2)] {
            if g.len() < 2 {
                return Err(Error::SampleTooSmall {
                    group: id,
                    size: g.len(),
                    required: 2,
                });
            }
        }
        Ok(Self {
            group1,
            group2,
            tau: self.tau,
            p1: self.p1,
            p2: self.p2,
        })
    }

    /// Largest observed time across both groups.
    pub fn max_time(&self) -> f64 {
        self.group1
            .iter()
            .chain(&self.group2)
            .map(|o| o.time)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
