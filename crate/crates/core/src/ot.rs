//! Exact empirical optimal transport with squared-Euclidean cost.
//!
//! Used as ground truth for the Gaussian closed form: between two equal-size
//! samples the optimal plan is a permutation, found here with a
//! shortest-augmenting-path assignment solver.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::w2_parameters;
use crate::seed::sub_seed;
use crate::synthgen::GaussianSampler;

/// Largest sample size accepted by [`empirical_w2_squared`].
pub const ASSIGNMENT_CAP: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `assignment[i]` is the y-index matched to x-index `i`.
    pub assignment: Vec<usize>,
    /// Mean squared Euclidean cost under the assignment.
    pub cost: f64,
}

/// Mean of per-pair costs, summed in ascending order so that the same
/// multiset of costs always produces the same bits.
pub fn mean_cost(mut terms: Vec<f64>) -> f64 {
    let n = terms.len() as f64;
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum::<f64>() / n
}

/// 1-D W2² between equal-size samples: sorted (quantile) pairing.
pub fn empirical_w2_squared_1d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("empty samples".into()));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    Ok(mean_cost(xs.iter().zip(&ys).map(|(a, b)| (a - b) * (a - b)).collect()))
}

/// Exact W2² between two equal-size point clouds (rows are points).
pub fn empirical_w2_squared(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<TransportPlan> {
    empirical_w2_squared_capped(x, y, ASSIGNMENT_CAP)
}

pub fn empirical_w2_squared_capped(x: &DMatrix<f64>, y: &DMatrix<f64>, cap: usize) -> Result<TransportPlan> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(x.nrows(), y.nrows()));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(x.ncols(), y.ncols()));
    }
    let n = x.nrows();
    if n == 0 {
        return Err(Error::InsufficientData("empty samples".into()));
    }
    if n > cap {
        return Err(Error::InvalidArgument(format!(
            "assignment size {n} exceeds the cap of {cap}"
        )));
    }
    let cost = squared_distances(x, y);
    let assignment = solve_assignment(&cost, n);
    let terms = (0..n).map(|i| cost[i * n + assignment[i]]).collect();
    Ok(TransportPlan {
        assignment,
        cost: mean_cost(terms),
    })
}

/// Row-major n×m matrix of squared Euclidean distances between rows.
pub fn squared_distances(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<f64> {
    let xr: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let yr: Vec<Vec<f64>> = y.row_iter().map(|r| r.iter().copied().collect()).collect();
    xr.par_iter()
        .flat_map_iter(|a| {
            yr.iter()
                .map(move |b| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
        })
        .collect()
}

/// Minimum-cost perfect matching on a dense row-major n×n cost matrix.
///
/// Hungarian method in its O(n³) shortest-augmenting-path form: each row is
/// inserted by a Dijkstra-like sweep over reduced costs, with dual potentials
/// `u` (rows) and `v` (columns). Index 0 is a sentinel column. Columns not yet
/// reached by the sweep are kept in a list so each step only scans those.
pub fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n×n");
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // row_of[j]: row (1-based) matched to column j; 0 = free
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_slack = vec![0.0; n + 1];
    let mut free: Vec<usize> = Vec::with_capacity(n);
    let mut reached: Vec<usize> = Vec::with_capacity(n + 1);

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        free.clear();
        free.extend(1..=n);
        reached.clear();
        min_slack.fill(f64::INFINITY);
        loop {
            reached.push(j0);
            let i0 = row_of[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let ui = u[i0];
            let mut delta = f64::INFINITY;
            let mut pick = 0;
            for (k, &j) in free.iter().enumerate() {
                let reduced = row[j - 1] - ui - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    pick = k;
                }
            }
            for &j in &reached {
                u[row_of[j]] += delta;
                v[j] -= delta;
            }
            for &j in &free {
                min_slack[j] -= delta;
            }
            j0 = free.swap_remove(pick);
            if row_of[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    assignment
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub closed_form: f64,
    pub empirical: f64,
    /// `|empirical − closed_form| / closed_form`; absent when the closed
    /// form is zero.
    pub rel_gap: Option<f64>,
}

/// Samples `n` points from each Gaussian and compares the exact empirical
/// transport cost with the closed form.
pub fn gaussian_vs_empirical_gap(
    mean_x: &DVector<f64>,
    cov_x: &DMatrix<f64>,
    mean_y: &DVector<f64>,
    cov_y: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<GapReport> {
    let (closed_form, _) = w2_parameters(mean_x, cov_x, mean_y, cov_y)?;
    let sx = GaussianSampler::new(mean_x.clone(), cov_x)?;
    let sy = GaussianSampler::new(mean_y.clone(), cov_y)?;
    let x = sx.sample(n, &mut ChaCha8Rng::seed_from_u64(sub_seed(seed, 0, 0)));
    let y = sy.sample(n, &mut ChaCha8Rng::seed_from_u64(sub_seed(seed, 0, 1)));
    let empirical = empirical_w2_squared(&x, &y)?.cost;
    Ok(GapReport {
        closed_form,
        empirical,
        rel_gap: (closed_form > 0.0).then(|| (empirical - closed_form).abs() / closed_form),
    })
}
