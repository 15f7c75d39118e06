//! Two-sample jackknife pseudo-observations.
//!
//! Entry `(i1, i2)` combines the full estimator with the three reduced
//! estimators that drop subject `i1` of group 1, subject `i2` of group 2, or
//! both:
//!
//! ```text
//! n1 n2 θ̂ − (n1−1) n2 θ̂₁⁽ⁱ¹⁾ − n1 (n2−1) θ̂₂⁽ⁱ²⁾ + (n1−1)(n2−1) θ̂₁₂⁽ⁱ¹ⁱ²⁾
//! ```
//!
//! Every reduced group-2 curve jumps only at event times of the full group-2
//! sample, so all integrals are dot products on one grid: group-1 curves
//! evaluated at the grid, against group-2 jump sizes on the grid.

use crate::error::Result;
use crate::exec::{map_indexed, Execution};
use crate::survival::{kaplan_meier, km_with_leave_one_out, theta_integral, SurvivalCurve, TwoSampleDataset};

/// n1 × n2 pseudo-observations with their marginal means.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoMatrix {
    n1: usize,
    n2: usize,
    /// Row-major values.
    values: Vec<f64>,
    row_means: Vec<f64>,
    col_means: Vec<f64>,
    grand_mean: f64,
    theta_hat: f64,
}

impl PseudoMatrix {
    /// Wraps row-major values, computing the marginal means.
    pub fn from_values(n1: usize, n2: usize, values: Vec<f64>, theta_hat: f64) -> Self {
        assert_eq!(values.len(), n1 * n2, "pseudo matrix shape mismatch");
        let (row_means, col_means, grand_mean) = means(n1, n2, &values);
        Self {
            n1,
            n2,
            values,
            row_means,
            col_means,
            grand_mean,
            theta_hat,
        }
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    #[inline]
    pub fn get(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.n2 + i2]
    }

    pub fn row(&self, i1: usize) -> &[f64] {
        &self.values[i1 * self.n2..(i1 + 1) * self.n2]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_means(&self) -> &[f64] {
        &self.row_means
    }

    pub fn col_means(&self) -> &[f64] {
        &self.col_means
    }

    pub fn grand_mean(&self) -> f64 {
        self.grand_mean
    }

    /// Full-sample estimate θ̂(τ).
    pub fn theta_hat(&self) -> f64 {
        self.theta_hat
    }
}

fn means(n1: usize, n2: usize, values: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let mut row_means = Vec::with_capacity(n1);
    let mut col_sums = vec![0.0; n2];
    let mut total = 0.0;
    for row in values.chunks_exact(n2) {
        let s: f64 = row.iter().sum();
        row_means.push(s / n2 as f64);
        total += s;
        for (c, v) in col_sums.iter_mut().zip(row) {
            *c += v;
        }
    }
    let col_means = col_sums.into_iter().map(|s| s / n1 as f64).collect();
    (row_means, col_means, total / (n1 * n2) as f64)
}

/// Row means, column means and grand mean of a pseudo matrix.
pub fn marginal_means(matrix: &PseudoMatrix) -> (Vec<f64>, Vec<f64>, f64) {
    means(matrix.n1, matrix.n2, &matrix.values)
}

/// θ̂(τ) = −∫_{(0,τ)} Ŝ1 dŜ2 from the Kaplan–Meier curves of both groups.
pub fn theta_hat(data: &TwoSampleDataset) -> Result<f64> {
    let s1 = kaplan_meier(data.group1())?;
    let s2 = kaplan_meier(data.group2())?;
    Ok(theta_integral(&s1, &s2, data.tau()))
}

/// Values of `curve` at each grid point (grid sorted ascending).
fn values_on_grid(curve: &SurvivalCurve, grid: &[f64]) -> Vec<f64> {
    let times = curve.jump_times();
    let vals = curve.values();
    let mut k = 0;
    grid.iter()
        .map(|&g| {
            while k < times.len() && times[k] <= g {
                k += 1;
            }
            if k == 0 {
                1.0
            } else {
                vals[k - 1]
            }
        })
        .collect()
}

/// Jump sizes of `curve` at each grid point; zero where it does not jump.
fn jumps_on_grid(curve: &SurvivalCurve, grid: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    let mut g = 0;
    for (t, size) in curve.jumps() {
        while g < grid.len() && grid[g] < t {
            g += 1;
        }
        if g == grid.len() {
            break;
        }
        if grid[g] == t {
            out[g] = size;
        }
    }
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds the pseudo-observation matrix with the default execution strategy.
pub fn pseudo_matrix(data: &TwoSampleDataset) -> Result<PseudoMatrix> {
    pseudo_matrix_with(data, Execution::default())
}

/// Builds the pseudo-observation matrix; rows are computed independently.
pub fn pseudo_matrix_with(data: &TwoSampleDataset, exec: Execution) -> Result<PseudoMatrix> {
    let (n1, n2) = (data.n1(), data.n2());
    let (full1, loo1) = km_with_leave_one_out(data.group1())?;
    let (full2, loo2) = km_with_leave_one_out(data.group2())?;
    let tau = data.tau();
    let grid: Vec<f64> = full2.jump_times().iter().copied().take_while(|&t| t < tau).collect();

    let s1_full = values_on_grid(&full1, &grid);
    let d2_full = jumps_on_grid(&full2, &grid);
    let s1_loo: Vec<Vec<f64>> = loo1.iter().map(|c| values_on_grid(c, &grid)).collect();
    let d2_loo: Vec<Vec<f64>> = loo2.iter().map(|c| jumps_on_grid(c, &grid)).collect();

    let theta = dot(&s1_full, &d2_full);
    let theta1: Vec<f64> = s1_loo.iter().map(|s| dot(s, &d2_full)).collect();
    let theta2: Vec<f64> = d2_loo.iter().map(|d| dot(&s1_full, d)).collect();

    let (f1, f2) = (n1 as f64, n2 as f64);
    let c_full = f1 * f2;
    let c1 = (f1 - 1.0) * f2;
    let c2 = f1 * (f2 - 1.0);
    let c12 = (f1 - 1.0) * (f2 - 1.0);

    let rows = map_indexed(n1, exec, |i1| {
        let s = &s1_loo[i1];
        let base = c_full * theta - c1 * theta1[i1];
        (0..n2)
            .map(|i2| base - c2 * theta2[i2] + c12 * dot(s, &d2_loo[i2]))
            .collect::<Vec<f64>>()
    });
    let values = rows.concat();
    Ok(PseudoMatrix::from_values(n1, n2, values, theta))
}
