mod common;

use common::*;
use proptest::prelude::*;
use rte_core::inference::{ReferenceDistribution, TestMethod};
use rte_core::predict::{classify, tie_correction_term, Classification};
use rte_core::pseudo::pseudo_matrix;
use rte_core::survival::{kaplan_meier, theta_integral, CensoringMode, Observation, TwoSampleDataset};

/// Times on a 0.5 grid in [−3, 5], so ties are common.
fn times(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-6i32..=10).prop_map(|k| k as f64 * 0.5), 2..=max)
}

fn sample(max: usize) -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec(
        ((1i32..=12).prop_map(|k| k as f64 * 0.5), prop::bool::weighted(0.7)),
        2..=max,
    )
}

fn obs(v: &[(f64, bool)]) -> Vec<Observation> {
    v.iter().map(|&(t, e)| Observation::new(t, e, vec![])).collect()
}

fn events(v: &[f64]) -> Vec<Observation> {
    v.iter().map(|&t| Observation::event_at(t)).collect()
}

fn uncensored(t1: &[f64], t2: &[f64]) -> TwoSampleDataset {
    TwoSampleDataset::new(events(t1), events(t2), f64::INFINITY, CensoringMode::Uncensored).unwrap()
}

fn censored(g1: &[(f64, bool)], g2: &[(f64, bool)], tau: f64) -> TwoSampleDataset {
    TwoSampleDataset::new(obs(g1), obs(g2), tau, CensoringMode::Censored).unwrap()
}

fn probe_points(t: &[f64]) -> Vec<f64> {
    let mut grid = vec![-10.0, 10.0];
    for &x in t {
        grid.extend([x - 0.25, x, x + 0.25]);
    }
    grid
}

fn count(t: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    t.iter().filter(|&&x| pred(x)).count() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn km_on_uncensored_data_is_empirical_survivor(t in times(25)) {
        let s = kaplan_meier(&events(&t)).unwrap();
        let n = t.len() as f64;
        for x in probe_points(&t) {
            let emp = count(&t, |y| y > x) / n;
            prop_assert!((s.eval(x) - emp).abs() < 1e-12);
        }
    }

    #[test]
    fn km_is_a_nonincreasing_curve_in_unit_interval(v in sample(30)) {
        let s = kaplan_meier(&obs(&v)).unwrap();
        let vals = s.values();
        prop_assert!(vals.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(s.jump_times().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn theta_on_uncensored_data_is_pair_count(t1 in times(20), t2 in times(20)) {
        let th = theta_integral(&kaplan_meier(&events(&t1)).unwrap(), &kaplan_meier(&events(&t2)).unwrap(), f64::INFINITY);
        let wins: f64 = t1.iter().map(|&a| count(&t2, |b| a > b)).sum();
        prop_assert!((th - wins / (t1.len() * t2.len()) as f64).abs() < 1e-12);
    }

    #[test]
    fn theta_is_nondecreasing_in_tau(g1 in sample(15), g2 in sample(15)) {
        let s1 = kaplan_meier(&obs(&g1)).unwrap();
        let s2 = kaplan_meier(&obs(&g2)).unwrap();
        let mut last = 0.0;
        for k in 0..=16 {
            let th = theta_integral(&s1, &s2, k as f64 * 0.4);
            prop_assert!(th >= last - 1e-15);
            last = th;
        }
        prop_assert!(theta_integral(&s1, &s2, f64::INFINITY) >= last - 1e-15);
    }

    #[test]
    fn swapped_groups_and_ties_partition_unity(t1 in times(20), t2 in times(20)) {
        let s1 = kaplan_meier(&events(&t1)).unwrap();
        let s2 = kaplan_meier(&events(&t2)).unwrap();
        let total = theta_integral(&s1, &s2, f64::INFINITY)
            + theta_integral(&s2, &s1, f64::INFINITY)
            + 2.0 * tie_correction_term(&s1, &s2, f64::INFINITY);
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uncensored_pseudo_values_are_indicators(t1 in times(15), t2 in times(15)) {
        let d = uncensored(&t1, &t2);
        let m = pseudo_matrix(&d).unwrap();
        let s1 = kaplan_meier(d.group1()).unwrap();
        let s2 = kaplan_meier(d.group2()).unwrap();
        for (i1, &a) in t1.iter().enumerate() {
            for (i2, &b) in t2.iter().enumerate() {
                let ind = if a > b { 1.0 } else { 0.0 };
                prop_assert!((m.get(i1, i2) - ind).abs() < 1e-10);
            }
            prop_assert!((m.row_means()[i1] - (1.0 - s2.left_limit(a))).abs() < 1e-10);
        }
        for (i2, &b) in t2.iter().enumerate() {
            prop_assert!((m.col_means()[i2] - s1.eval(b)).abs() < 1e-10);
        }
    }

    #[test]
    fn pseudo_matrix_is_permutation_equivariant(
        g1 in sample(10),
        g2 in sample(10),
        shift1 in 0usize..10,
        shift2 in 0usize..10,
    ) {
        let d = censored(&g1, &g2, f64::INFINITY);
        let p1: Vec<usize> = (0..g1.len()).map(|i| (i + shift1) % g1.len()).rev().collect();
        let p2: Vec<usize> = (0..g2.len()).map(|i| (i + shift2) % g2.len()).collect();
        let m = pseudo_matrix(&d).unwrap();
        let pm = pseudo_matrix(&d.resample(&p1, &p2).unwrap()).unwrap();
        for (a, &i1) in p1.iter().enumerate() {
            for (b, &i2) in p2.iter().enumerate() {
                prop_assert!((pm.get(a, b) - m.get(i1, i2)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn censored_pseudo_values_are_returned_unclipped(g1 in sample(8), g2 in sample(8), tau in 1.0f64..7.0) {
        let d = censored(&g1, &g2, tau);
        let fast = rows(&pseudo_matrix(&d).unwrap());
        let slow = naive_pseudo(&d);
        for (a, b) in fast.iter().flatten().zip(slow.iter().flatten()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn tie_correction_lies_in_half_unit_interval(g1 in sample(20), g2 in sample(20), tau in 0.0f64..8.0) {
        let c = tie_correction_term(&kaplan_meier(&obs(&g1)).unwrap(), &kaplan_meier(&obs(&g2)).unwrap(), tau);
        prop_assert!((0.0..=0.5).contains(&c));
    }

    #[test]
    fn scale_tests_are_monotone_in_alpha(
        centered in prop::collection::vec(-1.0f64..1.0, 20..200),
        estimate in -1.5f64..1.5,
        a in 0.001f64..0.5,
        b in 0.001f64..0.5,
    ) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let strict = ReferenceDistribution::from_centered(&centered, lo).unwrap();
        let loose = ReferenceDistribution::from_centered(&centered, hi).unwrap();
        for m in [TestMethod::Emp, TestMethod::Iqr, TestMethod::Mad] {
            if strict.decide(m, estimate).reject == Some(true) {
                prop_assert_eq!(loose.decide(m, estimate).reject, Some(true));
            }
        }
    }

    #[test]
    fn reject_flags_follow_their_rules(
        centered in prop::collection::vec(-1.0f64..1.0, 20..200),
        estimate in -1.5f64..1.5,
    ) {
        let r = ReferenceDistribution::from_centered(&centered, 0.05).unwrap();
        for m in [TestMethod::Emp, TestMethod::Iqr, TestMethod::Mad] {
            let s = r.scale(m).unwrap();
            prop_assert_eq!(r.decide(m, estimate).reject, Some(estimate.abs() / s > r.z));
        }
        let q = r.decide(TestMethod::Quantile, estimate);
        prop_assert_eq!(q.reject, Some(estimate < r.q_low || estimate > r.q_high));
    }

    #[test]
    fn classification_rule_is_exact(lo in 0.0f64..1.0, width in 0.0f64..1.0) {
        let hi = lo + width * (1.0 - lo);
        let expected = if lo > 0.5 {
            Classification::InterventionBenefit
        } else if hi < 0.5 {
            Classification::ControlBenefit
        } else {
            Classification::Indeterminate
        };
        prop_assert_eq!(classify(lo, hi), expected);
    }
}

#[test]
fn censoring_produces_pseudo_values_outside_unit_interval() {
    let mut r = rng(77);
    let found = (0..200).any(|_| {
        let d = random_dataset(&mut r, 10, 10, 0, 0, 0.4);
        pseudo_matrix(&d)
            .unwrap()
            .values()
            .iter()
            .any(|&v| !(0.0..=1.0).contains(&v))
    });
    assert!(found);
}
