//! Repeated subsampling of two cohorts into a distribution of distances.
//!
//! Every repeat draws its subsamples from a ChaCha8 stream keyed by
//! [`sub_seed`]`(seed, repeat, side)`, so the values do not depend on how
//! repeats are scheduled across threads. Values are always assembled in
//! repeat order.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{frechet_distance, wasabi, DistanceResult};
use crate::mmd::{mmd_squared, KernelSpec, MmdEstimator};
use crate::seed::sub_seed;
use crate::stats::summary::Summary;
use crate::table::FeatureTable;

pub const DEFAULT_SAMPLE_SIZE: usize = 500;
pub const DEFAULT_REPEATS: usize = 1000;

const SIDE_X: u64 = 0;
const SIDE_Y: u64 = 1;
const SIDE_SPLIT: u64 = 2;

/// Which distance to compute on each pair of subsamples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum MetricSpec {
    #[default]
    Wasabi,
    Frechet,
    Mmd {
        #[serde(default)]
        kernel: KernelSpec,
        #[serde(default)]
        estimator: MmdEstimator,
    },
}

impl MetricSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MetricSpec::Wasabi => "wasabi",
            MetricSpec::Frechet => "frechet",
            MetricSpec::Mmd { .. } => "mmd",
        }
    }

    pub fn compute(&self, x: &FeatureTable, y: &FeatureTable) -> Result<DistanceResult> {
        match self {
            MetricSpec::Wasabi => wasabi(x, y),
            MetricSpec::Frechet => frechet_distance(x.values(), y.values()),
            MetricSpec::Mmd { kernel, estimator } => mmd_squared(x.values(), y.values(), kernel, *estimator),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// Subsamples drawn from two different cohorts.
    BetweenCohorts,
    /// Subsamples drawn from two random halves of one cohort.
    WithinCohort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub metric: MetricSpec,
    pub design: Design,
    pub repeats: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub values: Vec<f64>,
    pub summary: Summary,
}

impl BootstrapReport {
    fn new(metric: MetricSpec, design: Design, sample_size: usize, seed: u64, values: Vec<f64>) -> Self {
        BootstrapReport {
            metric,
            design,
            repeats: values.len(),
            sample_size,
            seed,
            summary: Summary::from_values(&values),
            values,
        }
    }

    /// Two-column `repeat,value` text.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("repeat,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v:?}\n"));
        }
        out
    }
}

fn draw(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

fn run_repeats(repeats: usize, f: impl Fn(u64) -> Result<f64> + Sync) -> Result<Vec<f64>> {
    let results: Vec<Result<f64>> = (0..repeats as u64).into_par_iter().map(&f).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Repeat {
                repeat: i,
                source: Box::new(e),
            })
        })
        .collect()
}

fn check_repeats(repeats: usize, sample_size: usize) -> Result<()> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    if sample_size == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    Ok(())
}

/// Distances between `sample_size` rows drawn without replacement from `x`
/// and, independently, from `y`, for each of `repeats` repeats.
pub fn run_bootstrap(
    x: &FeatureTable,
    y: &FeatureTable,
    metric: &MetricSpec,
    sample_size: usize,
    repeats: usize,
    seed: u64,
) -> Result<BootstrapReport> {
    check_repeats(repeats, sample_size)?;
    for t in [x, y] {
        if sample_size > t.n_subjects() {
            return Err(Error::InsufficientData(format!(
                "sample size {sample_size} exceeds a table with {} rows",
                t.n_subjects()
            )));
        }
    }
    let values = run_repeats(repeats, |r| {
        let sx = x.select_rows(&draw(x.n_subjects(), sample_size, sub_seed(seed, r, SIDE_X)));
        let sy = y.select_rows(&draw(y.n_subjects(), sample_size, sub_seed(seed, r, SIDE_Y)));
        metric.compute(&sx, &sy).map(|d| d.value)
    })?;
    Ok(BootstrapReport::new(*metric, Design::BetweenCohorts, sample_size, seed, values))
}

/// The two disjoint subsamples used by repeat `repeat` of
/// [`within_cohort_null`], as row indices.
pub fn within_cohort_split(n: usize, sample_size: usize, seed: u64, repeat: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(seed, repeat, SIDE_SPLIT)));
    let (a, b) = rows.split_at(n / 2);
    let pick = |half: &[usize], side| {
        let mut out: Vec<usize> = draw(half.len(), sample_size, sub_seed(seed, repeat, side))
            .into_iter()
            .map(|i| half[i])
            .collect();
        out.sort_unstable();
        out
    };
    (pick(a, SIDE_X), pick(b, SIDE_Y))
}

/// Reference "null" distribution: each repeat splits one cohort into two
/// random halves and compares `sample_size` rows from each.
pub fn within_cohort_null(
    t: &FeatureTable,
    metric: &MetricSpec,
    sample_size: usize,
    repeats: usize,
    seed: u64,
) -> Result<BootstrapReport> {
    check_repeats(repeats, sample_size)?;
    if t.n_subjects() < 2 * sample_size {
        return Err(Error::InsufficientData(format!(
            "within-cohort null needs at least {} rows, table has {}",
            2 * sample_size,
            t.n_subjects()
        )));
    }
    let values = run_repeats(repeats, |r| {
        let (a, b) = within_cohort_split(t.n_subjects(), sample_size, seed, r);
        metric.compute(&t.select_rows(&a), &t.select_rows(&b)).map(|d| d.value)
    })?;
    Ok(BootstrapReport::new(*metric, Design::WithinCohort, sample_size, seed, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::normalize_by_icv;
    use nalgebra::DMatrix;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_table(n: usize, d: usize, seed: u64, prefix: &str) -> FeatureTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = DMatrix::from_fn(n, d, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            10.0 + z
        });
        let t = FeatureTable::new(
            (0..n).map(|i| format!("{prefix}{i}")).collect(),
            (0..d).map(|j| format!("f{j}")).collect(),
            values,
            None,
            Some(vec![1.0; n]),
        )
        .unwrap();
        normalize_by_icv(&t).unwrap()
    }

    #[test]
    fn deterministic_values() {
        let x = gaussian_table(60, 3, 1, "x");
        let y = gaussian_table(60, 3, 2, "y");
        let a = run_bootstrap(&x, &y, &MetricSpec::Wasabi, 20, 3, 7).unwrap();
        let b = run_bootstrap(&x, &y, &MetricSpec::Wasabi, 20, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values.len(), 3);
        let c = run_bootstrap(&x, &y, &MetricSpec::Wasabi, 20, 3, 8).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn sample_size_larger_than_table() {
        let x = gaussian_table(10, 2, 1, "x");
        assert!(matches!(
            run_bootstrap(&x, &x, &MetricSpec::Wasabi, 11, 1, 0),
            Err(Error::InsufficientData(_))
        ));
        assert!(within_cohort_null(&x, &MetricSpec::Wasabi, 6, 1, 0).is_err());
    }

    #[test]
    fn failing_repeat_reports_index() {
        // sample_size 1 cannot fit a covariance
        let x = gaussian_table(10, 2, 1, "x");
        let err = run_bootstrap(&x, &x, &MetricSpec::Wasabi, 1, 2, 0).unwrap_err();
        assert!(matches!(err, Error::Repeat { repeat: 0, .. }), "{err}");
    }

    #[test]
    fn within_cohort_subsamples_are_disjoint() {
        for r in 0..50 {
            let (a, b) = within_cohort_split(100, 30, 9, r);
            assert_eq!(a.len(), 30);
            assert!(a.iter().all(|i| !b.contains(i)));
        }
    }

    #[test]
    fn csv_export() {
        let x = gaussian_table(40, 2, 3, "x");
        let r = within_cohort_null(&x, &MetricSpec::Frechet, 10, 2, 0).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("repeat,value\n0,"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn metric_spec_json() {
        let m: MetricSpec = serde_json::from_str(r#"{"metric":"mmd","kernel":{"kind":"linear"}}"#).unwrap();
        assert_eq!(
            m,
            MetricSpec::Mmd {
                kernel: KernelSpec::linear(),
                estimator: MmdEstimator::Unbiased
            }
        );
        assert_eq!(serde_json::to_string(&MetricSpec::Wasabi).unwrap(), r#"{"metric":"wasabi"}"#);
    }
}
