//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rte_core::gee::Design;
use rte_core::pseudo::PseudoMatrix;
use rte_core::survival::{CensoringMode, Observation, TwoSampleDataset};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Product-limit estimate at `t`, counting event times `s` with `s <= t`
/// (or `s < t` when `strict`).
fn km_at(sample: &[(f64, bool)], t: f64, strict: bool) -> f64 {
    let mut times: Vec<f64> = sample.iter().filter(|o| o.1).map(|o| o.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut s = 1.0;
    for &u in &times {
        let included = if strict { u < t } else { u <= t };
        if !included {
            break;
        }
        let at_risk = sample.iter().filter(|o| o.0 >= u).count() as f64;
        let deaths = sample.iter().filter(|o| o.1 && o.0 == u).count() as f64;
        s *= 1.0 - deaths / at_risk;
    }
    s
}

pub fn naive_km(sample: &[(f64, bool)], t: f64) -> f64 {
    km_at(sample, t, false)
}

pub fn naive_km_left(sample: &[(f64, bool)], t: f64) -> f64 {
    km_at(sample, t, true)
}

/// −∫_{(0,τ)} Ŝ1 dŜ2 summed over the distinct group-2 event times below τ.
pub fn naive_theta(g1: &[(f64, bool)], g2: &[(f64, bool)], tau: f64) -> f64 {
    let mut times: Vec<f64> = g2.iter().filter(|o| o.1 && o.0 < tau).map(|o| o.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .iter()
        .map(|&u| naive_km(g1, u) * (naive_km_left(g2, u) - naive_km(g2, u)))
        .sum()
}

fn without(sample: &[(f64, bool)], i: usize) -> Vec<(f64, bool)> {
    sample
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, o)| *o)
        .collect()
}

pub fn pairs(group: &[Observation]) -> Vec<(f64, bool)> {
    group.iter().map(|o| (o.time, o.event)).collect()
}

/// Four-term jackknife combination rebuilt from scratch for every pair.
pub fn naive_pseudo(data: &TwoSampleDataset) -> Vec<Vec<f64>> {
    let g1 = pairs(data.group1());
    let g2 = pairs(data.group2());
    let tau = data.tau();
    let (n1, n2) = (g1.len() as f64, g2.len() as f64);
    let full = naive_theta(&g1, &g2, tau);
    (0..g1.len())
        .map(|i1| {
            let g1i = without(&g1, i1);
            (0..g2.len())
                .map(|i2| {
                    let g2i = without(&g2, i2);
                    n1 * n2 * full
                        - (n1 - 1.0) * n2 * naive_theta(&g1i, &g2, tau)
                        - n1 * (n2 - 1.0) * naive_theta(&g1, &g2i, tau)
                        + (n1 - 1.0) * (n2 - 1.0) * naive_theta(&g1i, &g2i, tau)
                })
                .collect()
        })
        .collect()
}

/// Continuous, tie-free times with optional independent censoring and
/// `p1`, `p2` standard normal covariates.
pub fn random_dataset<R: Rng>(
    rng: &mut R,
    n1: usize,
    n2: usize,
    p1: usize,
    p2: usize,
    censor_prob: f64,
) -> TwoSampleDataset {
    let mut group = |n: usize, p: usize, shift: f64| -> Vec<Observation> {
        (0..n)
            .map(|_| {
                let t = shift + rng.random::<f64>() * 3.0;
                let event = rng.random::<f64>() >= censor_prob;
                let z = (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                Observation::new(t, event, z)
            })
            .collect()
    };
    let g1 = group(n1, p1, 0.3);
    let g2 = group(n2, p2, 0.0);
    let mode = if censor_prob == 0.0 {
        CensoringMode::Uncensored
    } else {
        CensoringMode::Censored
    };
    TwoSampleDataset::new(g1, g2, f64::INFINITY, mode).unwrap()
}

/// Same as [`random_dataset`] but with times on a coarse grid so ties occur.
pub fn random_tied_dataset<R: Rng>(rng: &mut R, n1: usize, n2: usize, censor_prob: f64) -> TwoSampleDataset {
    let mut group = |n: usize| -> Vec<Observation> {
        (0..n)
            .map(|_| {
                let t = (1 + rng.random_range(0..6)) as f64;
                Observation::new(t, rng.random::<f64>() >= censor_prob, vec![])
            })
            .collect()
    };
    let g1 = group(n1);
    let g2 = group(n2);
    TwoSampleDataset::new(g1, g2, f64::INFINITY, CensoringMode::Censored).unwrap()
}

/// Central-difference gradient.
pub fn fd_gradient<F: Fn(&DVector<f64>) -> f64>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|k| {
            let mut up = x.clone();
            let mut down = x.clone();
            up[k] += h;
            down[k] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        }),
    )
}

/// Central-difference Jacobian; column k holds ∂F/∂x_k.
pub fn fd_jacobian<F: Fn(&DVector<f64>) -> DVector<f64>>(f: F, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let p = x.len();
    let mut j = DMatrix::zeros(p, p);
    for k in 0..p {
        let mut up = x.clone();
        let mut down = x.clone();
        up[k] += h;
        down[k] -= h;
        let col = (f(&up) - f(&down)) / (2.0 * h);
        j.set_column(k, &col);
    }
    j
}

pub fn rel_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-12)
}

/// Literal triple-sum transcriptions of the empirical Ω̂⁽⁰⁾, Ω̂⁽¹⁾, Ω̂⁽²⁾
/// for row-major pair weights.
pub fn loop_nest_omegas(w: &[f64], design: &Design) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (n1, n2, p) = (design.n1(), design.n2(), design.dim());
    let wt = |a: usize, b: usize| w[a * n2 + b];
    let mut mean = DVector::zeros(p);
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            mean += design.row(i1, i2) * wt(i1, i2);
        }
    }
    mean /= (n1 * n2) as f64;
    let centering = &mean * mean.transpose();
    let mut o0 = DMatrix::zeros(p, p);
    let mut o1 = DMatrix::zeros(p, p);
    let mut o2 = DMatrix::zeros(p, p);
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let z = design.row(i1, i2);
            o0 += &z * z.transpose() * (wt(i1, i2) * wt(i1, i2));
            for j2 in 0..n2 {
                o1 += &z * design.row(i1, j2).transpose() * (wt(i1, i2) * wt(i1, j2));
            }
            for j1 in 0..n1 {
                o2 += &z * design.row(j1, i2).transpose() * (wt(i1, i2) * wt(j1, i2));
            }
        }
    }
    let (f1, f2) = (n1 as f64, n2 as f64);
    (
        o0 / (f1 * f2) - &centering,
        o1 / (f1 * f2 * f2) - &centering,
        o2 / (f1 * f1 * f2) - &centering,
    )
}

/// Composite Simpson rule for ∫_a^b f with `m` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// −∫_0^τ S1 dS2 for Weibull groups, as ∫ S1 f2 by quadrature.
pub fn weibull_theta_quadrature(lambda1: f64, k1: f64, lambda2: f64, k2: f64, tau: f64) -> f64 {
    let s = |t: f64, l: f64, k: f64| (-(t / l).powf(k)).exp();
    let f2 = |t: f64| k2 / lambda2 * (t / lambda2).powf(k2 - 1.0) * s(t, lambda2, k2);
    let upper = tau.min(lambda2 * 40f64.powf(1.0 / k2));
    simpson(|t| s(t, lambda1, k1) * f2(t), 0.0, upper, 200_000)
}

/// Pseudo matrix as nested rows.
pub fn rows(m: &PseudoMatrix) -> Vec<Vec<f64>> {
    (0..m.n1()).map(|i| m.row(i).to_vec()).collect()
}
