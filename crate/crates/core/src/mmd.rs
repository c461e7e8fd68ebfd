//! Kernel maximum mean discrepancy between two samples of feature vectors.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{DistanceResult, MetricKind};
use crate::stats::summary::quantile_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Rbf,
    Linear,
}

/// RBF bandwidth: an explicit σ or the pooled median pairwise distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    #[default]
    MedianHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default)]
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub fn rbf(bandwidth: Bandwidth) -> Self {
        KernelSpec {
            kind: KernelKind::Rbf,
            bandwidth,
        }
    }

    pub fn linear() -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            bandwidth: Bandwidth::MedianHeuristic,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Bandwidth::Fixed(s) = self.bandwidth {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MmdEstimator {
    Biased,
    #[default]
    Unbiased,
}

/// Row-major copy of a sample, one point per row.
struct Points {
    data: Vec<f64>,
    d: usize,
}

impl Points {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let d = m.ncols();
        let mut data = Vec::with_capacity(m.len());
        for row in m.row_iter() {
            data.extend(row.iter());
        }
        Points { data, d }
    }

    fn len(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.data.len() / self.d
        }
    }

    /// Total order on samples, used to fix the operand order so the
    /// result is bit-identical under swapping the two samples.
    fn canonical_cmp(&self, other: &Points) -> std::cmp::Ordering {
        self.len().cmp(&other.len()).then_with(|| {
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Copy)]
enum Kernel {
    Rbf { gamma: f64 },
    Linear,
}

impl Kernel {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Rbf { gamma } => (-gamma * sq_dist(a, b)).exp(),
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

fn median_pairwise_distance(pooled: &[&Points]) -> f64 {
    let rows: Vec<&[f64]> = pooled.iter().flat_map(|p| (0..p.len()).map(move |i| p.row(i))).collect();
    let mut dists: Vec<f64> = (0..rows.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            (i + 1..rows.len()).map(move |j| sq_dist(rows[i], rows[j]).sqrt())
        })
        .filter(|&d| d > 0.0)
        .collect();
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_unstable_by(f64::total_cmp);
    quantile_sorted(&dists, 0.5)
}

fn resolve(spec: &KernelSpec, pooled: &[&Points]) -> (Kernel, Option<f64>) {
    match spec.kind {
        KernelKind::Linear => (Kernel::Linear, None),
        KernelKind::Rbf => {
            let sigma = match spec.bandwidth {
                Bandwidth::Fixed(s) => s,
                Bandwidth::MedianHeuristic => median_pairwise_distance(pooled),
            };
            (
                Kernel::Rbf {
                    gamma: 1.0 / (2.0 * sigma * sigma),
                },
                Some(sigma),
            )
        }
    }
}

/// Σ_i Σ_j k(a_i, b_j), optionally skipping i == j. Row sums are computed in
/// parallel and added in row order so the result is schedule independent.
fn block_sum(a: &Points, b: &Points, kernel: Kernel, skip_diagonal: bool) -> f64 {
    let rows: Vec<f64> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let ai = a.row(i);
            (0..b.len())
                .filter(|&j| !(skip_diagonal && i == j))
                .map(|j| kernel.eval(ai, b.row(j)))
                .sum::<f64>()
        })
        .collect();
    rows.iter().sum()
}

fn combine(kxx: f64, kyy: f64, kxy: f64, n: usize, m: usize, estimator: MmdEstimator) -> f64 {
    let (n, m) = (n as f64, m as f64);
    match estimator {
        MmdEstimator::Biased => kxx / (n * n) + kyy / (m * m) - 2.0 * kxy / (n * m),
        MmdEstimator::Unbiased => kxx / (n * (n - 1.0)) + kyy / (m * (m - 1.0)) - 2.0 * kxy / (n * m),
    }
}

fn check_inputs(fx: &DMatrix<f64>, fy: &DMatrix<f64>, estimator: MmdEstimator) -> Result<()> {
    if fx.ncols() != fy.ncols() {
        return Err(Error::DimensionMismatch(fx.ncols(), fy.ncols()));
    }
    let min_rows = match estimator {
        MmdEstimator::Biased => 1,
        MmdEstimator::Unbiased => 2,
    };
    if fx.nrows() < min_rows || fy.nrows() < min_rows {
        return Err(Error::InsufficientData(format!(
            "{estimator:?} MMD needs at least {min_rows} rows per sample, got {} and {}",
            fx.nrows(),
            fy.nrows()
        )));
    }
    if fx.iter().chain(fy.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite feature value".into()));
    }
    Ok(())
}

/// Squared MMD with exact O(n²) double sums.
pub fn mmd_squared(
    fx: &DMatrix<f64>,
    fy: &DMatrix<f64>,
    k: &KernelSpec,
    estimator: MmdEstimator,
) -> Result<DistanceResult> {
    k.validate()?;
    check_inputs(fx, fy, estimator)?;
    let mut x = Points::from_matrix(fx);
    let mut y = Points::from_matrix(fy);
    if x.canonical_cmp(&y).is_gt() {
        std::mem::swap(&mut x, &mut y);
    }
    let (kernel, sigma) = resolve(k, &[&x, &y]);
    let skip = estimator == MmdEstimator::Unbiased;
    let kxx = block_sum(&x, &x, kernel, skip);
    let kyy = block_sum(&y, &y, kernel, skip);
    let kxy = block_sum(&x, &y, kernel, false);
    let value = combine(kxx, kyy, kxy, x.len(), y.len(), estimator);

    let mut notes = Vec::new();
    match (k.kind, sigma) {
        (KernelKind::Rbf, Some(s)) => notes.push(format!("rbf bandwidth {s}")),
        _ => notes.push("linear kernel".into()),
    }
    Ok(DistanceResult {
        metric: match estimator {
            MmdEstimator::Biased => MetricKind::MmdBiased,
            MmdEstimator::Unbiased => MetricKind::MmdUnbiased,
        },
        value,
        d: fx.ncols(),
        n_x: fx.nrows(),
        n_y: fy.nrows(),
        regularization: 0.0,
        notes,
    })
}

/// Permutation p-value of the unbiased MMD² statistic with +1 smoothing:
/// `(1 + #{perm ≥ observed}) / (1 + permutations)`. The kernel (including a
/// median-heuristic bandwidth) is resolved once on the pooled sample.
pub fn mmd_permutation_pvalue(
    fx: &DMatrix<f64>,
    fy: &DMatrix<f64>,
    k: &KernelSpec,
    permutations: usize,
    seed: u64,
) -> Result<f64> {
    if permutations == 0 {
        return Err(Error::InvalidArgument("permutations must be at least 1".into()));
    }
    k.validate()?;
    let estimator = MmdEstimator::Unbiased;
    check_inputs(fx, fy, estimator)?;
    let x = Points::from_matrix(fx);
    let y = Points::from_matrix(fy);
    let (kernel, _) = resolve(k, &[&x, &y]);
    let n = x.len();
    let total = n + y.len();
    let pooled: Vec<&[f64]> = (0..n).map(|i| x.row(i)).chain((0..y.len()).map(|i| y.row(i))).collect();

    let gram: Vec<f64> = (0..total)
        .into_par_iter()
        .flat_map_iter(|i| {
            let pooled = &pooled;
            (0..total).map(move |j| kernel.eval(pooled[i], pooled[j]))
        })
        .collect();

    let statistic = |labels: &[usize]| {
        let (sx, sy) = labels.split_at(n);
        let sum = |a: &[usize], b: &[usize], skip: bool| {
            let mut s = 0.0;
            for (ia, &i) in a.iter().enumerate() {
                for (ib, &j) in b.iter().enumerate() {
                    if !(skip && ia == ib) {
                        s += gram[i * total + j];
                    }
                }
            }
            s
        };
        combine(sum(sx, sx, true), sum(sy, sy, true), sum(sx, sy, false), sx.len(), sy.len(), estimator)
    };

    let mut labels: Vec<usize> = (0..total).collect();
    let observed = statistic(&labels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(&mut rng);
        if statistic(&labels) >= observed {
            exceed += 1;
        }
    }
    Ok((1 + exceed) as f64 / (1 + permutations) as f64)
}
