//! Pair-indexed estimating equations with unit working variance.
//!
//! For each pair `(i1, i2)` the design row is `Z = (1, z1ᵀ, z2ᵀ)ᵀ` and
//!
//! ```text
//! U(β) = (1/(n1 n2)) ΣΣ Z μ′(βᵀZ) (θ̃ − μ(βᵀZ))
//! ```
//!
//! Sums over pairs are accumulated row by row and reduced in row order, so
//! results do not depend on the thread count.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::link::Link;
use crate::pseudo::{pseudo_matrix_with, PseudoMatrix};
use crate::survival::TwoSampleDataset;

/// Covariates of both groups, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n1: usize,
    n2: usize,
    p1: usize,
    p2: usize,
    z1: Vec<f64>,
    z2: Vec<f64>,
}

impl Design {
    /// Builds a design from per-subject covariate rows.
    pub fn from_rows(z1: &[Vec<f64>], z2: &[Vec<f64>]) -> Result<Self> {
        let p1 = z1.first().map_or(0, Vec::len);
        let p2 = z2.first().map_or(0, Vec::len);
        for (rows, p, what) in [(z1, p1, "group-1 covariates"), (z2, p2, "group-2 covariates")] {
            if let Some(bad) = rows.iter().find(|r| r.len() != p) {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: p,
                    actual: bad.len(),
                });
            }
        }
        Ok(Self {
            n1: z1.len(),
            n2: z2.len(),
            p1,
            p2,
            z1: z1.concat(),
            z2: z2.concat(),
        })
    }

    pub fn from_dataset(data: &TwoSampleDataset) -> Self {
        let rows = |g: &[crate::survival::Observation]| -> Vec<f64> {
            g.iter().flat_map(|o| o.covariates.iter().copied()).collect()
        };
        Self {
            n1: data.n1(),
            n2: data.n2(),
            p1: data.p1(),
            p2: data.p2(),
            z1: rows(data.group1()),
            z2: rows(data.group2()),
        }
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    /// Length of a design row, `1 + p1 + p2`.
    pub fn dim(&self) -> usize {
        1 + self.p1 + self.p2
    }

    pub fn z1(&self, i1: usize) -> &[f64] {
        &self.z1[i1 * self.p1..(i1 + 1) * self.p1]
    }

    pub fn z2(&self, i2: usize) -> &[f64] {
        &self.z2[i2 * self.p2..(i2 + 1) * self.p2]
    }

    /// Writes `(1, z1ᵀ, z2ᵀ)` into `out`.
    #[inline]
    pub fn fill_row(&self, i1: usize, i2: usize, out: &mut [f64]) {
        out[0] = 1.0;
        out[1..=self.p1].copy_from_slice(self.z1(i1));
        out[1 + self.p1..].copy_from_slice(self.z2(i2));
    }

    pub fn row(&self, i1: usize, i2: usize) -> DVector<f64> {
        let mut z = vec![0.0; self.dim()];
        self.fill_row(i1, i2, &mut z);
        DVector::from_vec(z)
    }

    fn check(&self, matrix: &PseudoMatrix) -> Result<()> {
        if matrix.n1() != self.n1 {
            return Err(Error::DimensionMismatch {
                what: "group-1 size",
                expected: self.n1,
                actual: matrix.n1(),
            });
        }
        if matrix.n2() != self.n2 {
            return Err(Error::DimensionMismatch {
                what: "group-2 size",
                expected: self.n2,
                actual: matrix.n2(),
            });
        }
        Ok(())
    }

    fn check_beta(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector",
                expected: self.dim(),
                actual: beta.len(),
            });
        }
        Ok(())
    }
}

/// Sums `f` over all pairs, one partial accumulator per group-1 subject.
fn pair_sum<F>(design: &Design, exec: Execution, len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, usize, &[f64], &mut [f64]) + Sync + Send,
{
    let parts = map_indexed(design.n1, exec, |i1| {
        let mut acc = vec![0.0; len];
        let mut z = vec![0.0; design.dim()];
        for i2 in 0..design.n2 {
            design.fill_row(i1, i2, &mut z);
            f(i1, i2, &z, &mut acc);
        }
        acc
    });
    let mut total = vec![0.0; len];
    for part in parts {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pair_count(design: &Design) -> f64 {
    (design.n1 * design.n2) as f64
}

/// Normalized estimating function U(β).
pub fn estimating_function(
    beta: &DVector<f64>,
    matrix: &PseudoMatrix,
    design: &Design,
    link: &Link,
) -> Result<DVector<f64>> {
    design.check(matrix)?;
    design.check_beta(beta)?;
    let b = beta.as_slice();
    let p = design.dim();
    let sum = pair_sum(design, Execution::default(), p, |i1, i2, z, acc| {
        let eta = dot(b, z);
        let w = link.mu_prime(eta) * (matrix.get(i1, i2) - link.mu(eta));
        for (a, zk) in acc.iter_mut().zip(z) {
            *a += w * zk;
        }
    });
    Ok(DVector::from_vec(sum) / pair_count(design))
}

/// C(β) = (1/(n1 n2)) ΣΣ (θ̃ − μ/2) μ, whose gradient is U(β).
pub fn objective(beta: &DVector<f64>, matrix: &PseudoMatrix, design: &Design, link: &Link) -> Result<f64> {
    design.check(matrix)?;
    design.check_beta(beta)?;
    let b = beta.as_slice();
    let sum = pair_sum(design, Execution::default(), 1, |i1, i2, z, acc| {
        let mu = link.mu(dot(b, z));
        acc[0] += (matrix.get(i1, i2) - 0.5 * mu) * mu;
    });
    Ok(sum[0] / pair_count(design))
}

/// Analytic Jacobian of [`estimating_function`].
pub fn jacobian(beta: &DVector<f64>, matrix: &PseudoMatrix, design: &Design, link: &Link) -> Result<DMatrix<f64>> {
    design.check(matrix)?;
    design.check_beta(beta)?;
    let b = beta.as_slice();
    let p = design.dim();
    let sum = pair_sum(design, Execution::default(), p * p, |i1, i2, z, acc| {
        let eta = dot(b, z);
        let d1 = link.mu_prime(eta);
        let c = link.mu_double_prime(eta) * (matrix.get(i1, i2) - link.mu(eta)) - d1 * d1;
        for r in 0..p {
            let cz = c * z[r];
            for s in 0..p {
                acc[r * p + s] += cz * z[s];
            }
        }
    });
    Ok(DMatrix::from_row_slice(p, p, &sum) / pair_count(design))
}

/// What to do when a linear system is rank deficient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularPolicy {
    /// Use the Moore–Penrose pseudo-inverse and flag it.
    #[default]
    PseudoInverse,
    /// Fail with [`Error::SingularDesign`].
    Error,
}

/// Solves `a x = b`; returns the solution and whether the pseudo-inverse was needed.
pub fn solve_linear(a: &DMatrix<f64>, b: &DVector<f64>, policy: SingularPolicy) -> Result<(DVector<f64>, bool)> {
    let (svd, eps, singular) = checked_svd(a, policy)?;
    let x = svd.solve(b, eps).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((x, singular))
}

/// Inverse, or pseudo-inverse when singular.
pub fn invert(a: &DMatrix<f64>, policy: SingularPolicy) -> Result<(DMatrix<f64>, bool)> {
    let (svd, eps, singular) = checked_svd(a, policy)?;
    let inv = svd
        .pseudo_inverse(eps)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((inv, singular))
}

fn checked_svd(
    a: &DMatrix<f64>,
    policy: SingularPolicy,
) -> Result<(nalgebra::linalg::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, f64, bool)> {
    let dim = a.nrows();
    let svd = a.clone().svd(true, true);
    let eps = 1e-10 * svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let singular = rank < dim;
    if singular && policy == SingularPolicy::Error {
        return Err(Error::SingularDesign { rank, dim });
    }
    Ok((svd, eps, singular))
}

/// How a fit was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    ClosedForm,
    Newton,
}

/// Coefficient estimate with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// `(β0, β1ᵀ, β2ᵀ)`.
    pub beta: DVector<f64>,
    pub covariance: Option<DMatrix<f64>>,
    pub converged: bool,
    pub iterations: usize,
    /// ‖U(β̂)‖∞.
    pub gradient_norm: f64,
    pub method: FitMethod,
    pub pseudo_inverse_used: bool,
}

/// Σ̂ = (1/(n1 n2)) ΣΣ Z Zᵀ, assembled from per-group moments.
pub fn sigma_hat(design: &Design) -> DMatrix<f64> {
    let (n1, n2, p1, p2) = (design.n1, design.n2, design.p1, design.p2);
    let p = design.dim();
    let mut s = DMatrix::zeros(p, p);
    s[(0, 0)] = 1.0;
    let mut m1 = vec![0.0; p1];
    let mut m2 = vec![0.0; p2];
    for i in 0..n1 {
        let z = design.z1(i);
        for a in 0..p1 {
            m1[a] += z[a] / n1 as f64;
            for b in 0..p1 {
                s[(1 + a, 1 + b)] += z[a] * z[b] / n1 as f64;
            }
        }
    }
    for i in 0..n2 {
        let z = design.z2(i);
        for a in 0..p2 {
            m2[a] += z[a] / n2 as f64;
            for b in 0..p2 {
                s[(1 + p1 + a, 1 + p1 + b)] += z[a] * z[b] / n2 as f64;
            }
        }
    }
    for a in 0..p1 {
        s[(0, 1 + a)] = m1[a];
        s[(1 + a, 0)] = m1[a];
        for b in 0..p2 {
            s[(1 + a, 1 + p1 + b)] = m1[a] * m2[b];
            s[(1 + p1 + b, 1 + a)] = m1[a] * m2[b];
        }
    }
    for b in 0..p2 {
        s[(0, 1 + p1 + b)] = m2[b];
        s[(1 + p1 + b, 0)] = m2[b];
    }
    s
}

/// Ψ̂ = (θ̃••, (1/n1) Σ z1 θ̃i1•, (1/n2) Σ z2 θ̃•i2).
pub fn psi_hat(matrix: &PseudoMatrix, design: &Design) -> DVector<f64> {
    let (p1, p2) = (design.p1, design.p2);
    let mut psi = DVector::zeros(design.dim());
    psi[0] = matrix.grand_mean();
    for (i, &r) in matrix.row_means().iter().enumerate() {
        for (a, z) in design.z1(i).iter().enumerate() {
            psi[1 + a] += z * r / design.n1 as f64;
        }
    }
    for (i, &c) in matrix.col_means().iter().enumerate() {
        for (b, z) in design.z2(i).iter().enumerate() {
            psi[1 + p1 + b] += z * c / design.n2 as f64;
        }
    }
    debug_assert_eq!(psi.len(), 1 + p1 + p2);
    psi
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Identity-link estimator β̂ = Σ̂⁻¹ Ψ̂.
pub fn solve_closed_form_identity(matrix: &PseudoMatrix, design: &Design, policy: SingularPolicy) -> Result<FitResult> {
    design.check(matrix)?;
    let (beta, pinv) = solve_linear(&sigma_hat(design), &psi_hat(matrix, design), policy)?;
    let u = estimating_function(&beta, matrix, design, &Link::Identity)?;
    Ok(FitResult {
        beta,
        covariance: None,
        converged: true,
        iterations: 0,
        gradient_norm: sup_norm(&u),
        method: FitMethod::ClosedForm,
        pseudo_inverse_used: pinv,
    })
}

/// Newton starting point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartingPoint {
    #[default]
    Zero,
    /// Identity-link closed form mapped through the link at θ̃••.
    IdentityWarmStart,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub start: StartingPoint,
    pub singular: SingularPolicy,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 10,
            start: StartingPoint::Zero,
            singular: SingularPolicy::PseudoInverse,
        }
    }
}

fn starting_point(
    matrix: &PseudoMatrix,
    design: &Design,
    link: &Link,
    options: &NewtonOptions,
) -> Result<DVector<f64>> {
    let p = design.dim();
    match &options.start {
        StartingPoint::Zero => Ok(DVector::zeros(p)),
        StartingPoint::Given(v) => {
            let b = DVector::from_column_slice(v);
            design.check_beta(&b)?;
            Ok(b)
        }
        StartingPoint::IdentityWarmStart => {
            let lin = solve_closed_form_identity(matrix, design, SingularPolicy::PseudoInverse)?.beta;
            let target = matrix.grand_mean();
            let Some(eta0) = link.inverse(target) else {
                return Ok(DVector::zeros(p));
            };
            let slope = link.mu_prime(eta0);
            let mut b = lin.clone() / slope;
            b[0] = eta0 + (lin[0] - target) / slope;
            Ok(b)
        }
    }
}

/// Damped Newton iteration on U(β) = 0.
pub fn solve_newton(matrix: &PseudoMatrix, design: &Design, link: &Link, options: &NewtonOptions) -> Result<FitResult> {
    design.check(matrix)?;
    let mut beta = starting_point(matrix, design, link, options)?;
    let mut u = estimating_function(&beta, matrix, design, link)?;
    let mut norm = sup_norm(&u);
    let mut pinv = false;
    let mut iterations = 0;
    let not_converged = |beta: &DVector<f64>, iterations, norm| Error::NotConverged {
        iterations,
        gradient_norm: norm,
        last_beta: beta.iter().copied().collect(),
    };
    while norm.is_nan() || norm >= options.tol {
        if iterations == options.max_iter || !norm.is_finite() {
            return Err(not_converged(&beta, iterations, norm));
        }
        let jac = jacobian(&beta, matrix, design, link)?;
        let (step, singular) = solve_linear(&jac, &u, options.singular)?;
        pinv |= singular;
        let current = u.norm();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let cand = &beta - &step * t;
            let uc = estimating_function(&cand, matrix, design, link)?;
            let nc = uc.norm();
            if nc.is_finite() && (nc < current || sup_norm(&uc) < options.tol) {
                accepted = Some((cand, uc));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((b, uc)) => {
                beta = b;
                u = uc;
                norm = sup_norm(&u);
            }
            None => return Err(not_converged(&beta, iterations, norm)),
        }
    }
    Ok(FitResult {
        beta,
        covariance: None,
        converged: true,
        iterations,
        gradient_norm: norm,
        method: FitMethod::Newton,
        pseudo_inverse_used: pinv,
    })
}

/// Link and solver settings for [`fit_dataset`].
#[derive(Debug, Clone, Default)]
pub struct ModelSpec {
    pub link: Link,
    pub newton: NewtonOptions,
    pub exec: Execution,
}

/// Pseudo matrix, design and coefficient fit of one dataset.
#[derive(Debug, Clone)]
pub struct Fit {
    pub matrix: PseudoMatrix,
    pub design: Design,
    pub result: FitResult,
}

/// Builds pseudo-observations and fits the model without a covariance. The
/// identity link uses the closed form; other links use Newton.
pub fn fit_coefficients(data: &TwoSampleDataset, spec: &ModelSpec) -> Result<Fit> {
    let matrix = pseudo_matrix_with(data, spec.exec)?;
    let design = Design::from_dataset(data);
    let result = if spec.link.is_identity() {
        solve_closed_form_identity(&matrix, &design, spec.newton.singular)?
    } else {
        solve_newton(&matrix, &design, &spec.link, &spec.newton)?
    };
    Ok(Fit { matrix, design, result })
}

/// [`fit_coefficients`], plus the sandwich covariance for uncensored
/// identity-link fits.
pub fn fit_dataset(data: &TwoSampleDataset, spec: &ModelSpec) -> Result<Fit> {
    let mut fit = fit_coefficients(data, spec)?;
    if spec.link.is_identity() && data.is_uncensored() {
        fit.result.covariance = Some(sandwich_covariance_uncensored(data, &fit.matrix, &fit.design)?);
    }
    Ok(fit)
}

/// Empirical Ω̂⁽⁰⁾, Ω̂⁽¹⁾, Ω̂⁽²⁾ for a per-pair weight `w`; the indicator
/// 1{T1 > T2} gives the textbook estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaHats {
    pub omega0: DMatrix<f64>,
    pub omega1: DMatrix<f64>,
    pub omega2: DMatrix<f64>,
    /// (1/(n1 n2)) ΣΣ w Z.
    pub mean: DVector<f64>,
}

/// Computes [`OmegaHats`] from row-major pair weights.
pub fn omega_hats(weights: &[f64], design: &Design) -> Result<OmegaHats> {
    let (n1, n2, p) = (design.n1, design.n2, design.dim());
    if weights.len() != n1 * n2 {
        return Err(Error::DimensionMismatch {
            what: "pair weights",
            expected: n1 * n2,
            actual: weights.len(),
        });
    }
    let mut row_sums = vec![DVector::zeros(p); n1];
    let mut col_sums = vec![DVector::zeros(p); n2];
    let mut second = DMatrix::zeros(p, p);
    let mut z = DVector::zeros(p);
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            design.fill_row(i1, i2, z.as_mut_slice());
            let w = weights[i1 * n2 + i2];
            row_sums[i1].axpy(w, &z, 1.0);
            col_sums[i2].axpy(w, &z, 1.0);
            second.ger(w * w, &z, &z, 1.0);
        }
    }
    let pairs = (n1 * n2) as f64;
    let mean = row_sums.iter().fold(DVector::zeros(p), |acc, r| acc + r) / pairs;
    let centering = &mean * mean.transpose();
    let outer_sum = |sums: &[DVector<f64>]| {
        sums.iter()
            .fold(DMatrix::zeros(p, p), |acc: DMatrix<f64>, s| acc + s * s.transpose())
    };
    let omega0 = second / pairs - &centering;
    let omega1 = outer_sum(&row_sums) / (n1 as f64 * (n2 * n2) as f64) - &centering;
    let omega2 = outer_sum(&col_sums) / ((n1 * n1) as f64 * n2 as f64) - &centering;
    Ok(OmegaHats {
        omega0,
        omega1,
        omega2,
        mean,
    })
}

/// Pair indicators 1{T1 > T2}, row-major.
pub fn pair_indicators(data: &TwoSampleDataset) -> Vec<f64> {
    data.group1()
        .iter()
        .flat_map(|a| {
            data.group2()
                .iter()
                .map(move |b| if a.time > b.time { 1.0 } else { 0.0 })
        })
        .collect()
}

/// Ingredients and result of the uncensored sandwich estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Sandwich {
    pub beta: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub omega: OmegaHats,
    /// Σ̂⁻¹ Ω̂ Σ̂⁻ᵀ with Ω̂ = (1−λ̂)Ω̂⁽¹⁾ + λ̂Ω̂⁽²⁾.
    pub asymptotic: DMatrix<f64>,
    /// `asymptotic · (n1 + n2)/(n1 n2)`.
    pub covariance: DMatrix<f64>,
}

/// Sandwich estimator for the identity-link fit on uncensored data. The
/// Ω̂ terms use residual weights θ̃ − Zᵀβ̂.
pub fn sandwich_uncensored(data: &TwoSampleDataset, matrix: &PseudoMatrix, design: &Design) -> Result<Sandwich> {
    if !data.is_uncensored() {
        return Err(Error::CensoredData);
    }
    design.check(matrix)?;
    let sigma = sigma_hat(design);
    let (sigma_inv, _) = invert(&sigma, SingularPolicy::PseudoInverse)?;
    let beta = &sigma_inv * psi_hat(matrix, design);
    let (n1, n2) = (design.n1, design.n2);
    let mut z = vec![0.0; design.dim()];
    let mut weights = Vec::with_capacity(n1 * n2);
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            design.fill_row(i1, i2, &mut z);
            weights.push(matrix.get(i1, i2) - dot(beta.as_slice(), &z));
        }
    }
    let omega = omega_hats(&weights, design)?;
    let lambda = data.lambda();
    let combined = &omega.omega1 * (1.0 - lambda) + &omega.omega2 * lambda;
    let raw = &sigma_inv * combined * sigma_inv.transpose();
    let asymptotic = (&raw + raw.transpose()) * 0.5;
    let covariance = &asymptotic * ((n1 + n2) as f64 / (n1 * n2) as f64);
    Ok(Sandwich {
        beta,
        sigma,
        omega,
        asymptotic,
        covariance,
    })
}

/// Finite-sample covariance of β̂ for uncensored identity-link fits.
pub fn sandwich_covariance_uncensored(
    data: &TwoSampleDataset,
    matrix: &PseudoMatrix,
    design: &Design,
) -> Result<DMatrix<f64>> {
    Ok(sandwich_uncensored(data, matrix, design)?.covariance)
}
