//! Gaussian summaries and the closed-form squared 2-Wasserstein distance.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, check_symmetric, psd_eigen, sqrt_psd, symmetrize};
use crate::table::FeatureTable;

/// A negative total within `NEGATIVE_CLAMP_TOL · (Tr Σx + Tr Σy + ‖Δμ‖²)` is
/// round-off and is clamped to zero.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-10;
/// A ridge is added when `λ_min < RIDGE_TRIGGER · Tr Σ / d`.
pub const RIDGE_TRIGGER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Wasabi,
    Frechet,
    MmdBiased,
    MmdUnbiased,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Wasabi => "wasabi",
            MetricKind::Frechet => "frechet",
            MetricKind::MmdBiased => "mmd_biased",
            MetricKind::MmdUnbiased => "mmd_unbiased",
        }
    }
}

/// Scalar distance plus the metadata needed to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub metric: MetricKind,
    pub value: f64,
    pub d: usize,
    pub n_x: usize,
    pub n_y: usize,
    /// Total ridge added to the two covariance estimates (zero for MMD).
    pub regularization: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceDivisor {
    /// n − 1
    #[default]
    Unbiased,
    /// n
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub divisor: CovarianceDivisor,
    /// Apply the conditional ridge when the covariance is near-singular.
    pub ridge: bool,
    /// Refuse tables that have not been divided by intracranial volume.
    pub require_normalized: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            divisor: CovarianceDivisor::Unbiased,
            ridge: true,
            require_normalized: true,
        }
    }
}

/// Mean vector and covariance matrix fitted to one cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    n: usize,
    regularization_added: f64,
}

impl GaussianSummary {
    /// Wraps known parameters, checking symmetry and the PSD policy.
    pub fn from_parameters(mean: DVector<f64>, cov: DMatrix<f64>, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InsufficientData(format!("sample count {n} < 2")));
        }
        if mean.is_empty() {
            return Err(Error::InvalidArgument("zero-dimensional Gaussian".into()));
        }
        if cov.nrows() != mean.len() {
            return Err(Error::DimensionMismatch(mean.len(), cov.nrows()));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite mean".into()));
        }
        psd_eigen(&cov)?;
        Ok(GaussianSummary {
            mean,
            cov: symmetrize(&cov),
            n,
            regularization_added: 0.0,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }

    pub fn regularization_added(&self) -> f64 {
        self.regularization_added
    }

    /// JSON export for audit; matrices are written row by row.
    pub fn to_json(&self) -> serde_json::Value {
        let cov: Vec<Vec<f64>> = self.cov.row_iter().map(|r| r.iter().copied().collect()).collect();
        serde_json::json!({
            "d": self.d(),
            "n": self.n,
            "mean": self.mean.as_slice(),
            "cov": cov,
            "regularization_added": self.regularization_added,
        })
    }
}

/// Fits a Gaussian to a feature table (rows are subjects).
pub fn fit_gaussian(t: &FeatureTable) -> Result<GaussianSummary> {
    fit_gaussian_with(t, FitOptions::default())
}

pub fn fit_gaussian_with(t: &FeatureTable, options: FitOptions) -> Result<GaussianSummary> {
    if options.require_normalized && !t.is_normalized() {
        return Err(Error::NotNormalized);
    }
    fit_matrix(t.values(), options)
}

/// Fits a Gaussian to the rows of a raw matrix. `options.require_normalized`
/// is ignored here.
pub fn fit_matrix(values: &DMatrix<f64>, options: FitOptions) -> Result<GaussianSummary> {
    let (n, d) = values.shape();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 rows to fit a covariance, got {n}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("table has no feature columns".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in feature matrix".into()));
    }
    let mean: DVector<f64> = values.row_sum().transpose() / n as f64;
    let mut centered = values.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let divisor = match options.divisor {
        CovarianceDivisor::Unbiased => (n - 1) as f64,
        CovarianceDivisor::Population => n as f64,
    };
    let mut cov = symmetrize(&(centered.transpose() * &centered / divisor));

    let trace = cov.trace();
    if trace <= 0.0 {
        return Err(Error::InsufficientData(
            "every feature has zero variance".into(),
        ));
    }
    let eig = psd_eigen(&cov)?;
    let floor = RIDGE_TRIGGER * trace / d as f64;
    let mut regularization_added = 0.0;
    if options.ridge && eig.eigenvalues.min() < floor {
        for i in 0..d {
            cov[(i, i)] += floor;
        }
        regularization_added = floor;
    }
    Ok(GaussianSummary {
        mean,
        cov,
        n,
        regularization_added,
    })
}

/// Squared 2-Wasserstein distance between two Gaussians:
/// `‖μx − μy‖² + Tr(Σx + Σy − 2 (Σx^½ Σy Σx^½)^½)`.
pub fn w2_squared(gx: &GaussianSummary, gy: &GaussianSummary) -> Result<DistanceResult> {
    w2_tagged(gx, gy, MetricKind::Wasabi)
}

fn w2_tagged(gx: &GaussianSummary, gy: &GaussianSummary, metric: MetricKind) -> Result<DistanceResult> {
    let (value, mut notes) = w2_parameters(&gx.mean, &gx.cov, &gy.mean, &gy.cov)?;
    if gx.regularization_added > 0.0 {
        notes.push(format!("ridge {:e} added to first covariance", gx.regularization_added));
    }
    if gy.regularization_added > 0.0 {
        notes.push(format!("ridge {:e} added to second covariance", gy.regularization_added));
    }
    Ok(DistanceResult {
        metric,
        value,
        d: gx.d(),
        n_x: gx.n,
        n_y: gy.n,
        regularization: gx.regularization_added + gy.regularization_added,
        notes,
    })
}

/// Closed form on raw parameters. Returns the value and any audit notes.
pub fn w2_parameters(
    mean_x: &DVector<f64>,
    cov_x: &DMatrix<f64>,
    mean_y: &DVector<f64>,
    cov_y: &DMatrix<f64>,
) -> Result<(f64, Vec<String>)> {
    let d = mean_x.len();
    for (a, b) in [(d, mean_y.len()), (d, cov_x.nrows()), (d, cov_y.nrows())] {
        if a != b {
            return Err(Error::DimensionMismatch(a, b));
        }
    }
    check_symmetric(cov_x)?;
    check_symmetric(cov_y)?;
    if mean_x == mean_y && cov_x == cov_y {
        return Ok((0.0, vec!["identical summaries".into()]));
    }

    let mean_term = (mean_x - mean_y).norm_squared();
    let root_x = sqrt_psd(cov_x)?;
    psd_eigen(cov_y)?;
    let inner = symmetrize(&(&root_x * cov_y * &root_x));
    let cross = linalg::trace_sqrt_psd(&inner)?;
    let trace_x = cov_x.trace();
    let trace_y = cov_y.trace();
    let value = mean_term + trace_x + trace_y - 2.0 * cross;

    let mut notes = Vec::new();
    if value < 0.0 {
        let scale = trace_x + trace_y + mean_term;
        if value >= -NEGATIVE_CLAMP_TOL * scale {
            notes.push(format!("round-off negative total {value:e} clamped to 0"));
            return Ok((0.0, notes));
        }
        return Err(Error::Numerical(format!(
            "negative squared distance {value:e} beyond round-off (scale {scale:e})"
        )));
    }
    Ok((value, notes))
}

/// WASABI: closed-form W2² between Gaussian fits of two normalized cohorts.
pub fn wasabi(x: &FeatureTable, y: &FeatureTable) -> Result<DistanceResult> {
    check_same_features(x.feature_names(), y.feature_names())?;
    if !x.is_normalized() || !y.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let gx = fit_gaussian(x)?;
    let gy = fit_gaussian(y)?;
    w2_tagged(&gx, &gy, MetricKind::Wasabi)
}

/// The same closed form applied to arbitrary feature vectors, e.g. deep
/// embeddings from an external extractor (the FID formula).
pub fn frechet_distance(fx: &DMatrix<f64>, fy: &DMatrix<f64>) -> Result<DistanceResult> {
    if fx.ncols() != fy.ncols() {
        return Err(Error::DimensionMismatch(fx.ncols(), fy.ncols()));
    }
    let options = FitOptions {
        require_normalized: false,
        ..FitOptions::default()
    };
    let gx = fit_matrix(fx, options)?;
    let gy = fit_matrix(fy, options)?;
    w2_tagged(&gx, &gy, MetricKind::Frechet)
}

pub(crate) fn check_same_features(a: &[String], b: &[String]) -> Result<()> {
    if a == b {
        return Ok(());
    }
    let sa: BTreeSet<&str> = a.iter().map(String::as_str).collect();
    let sb: BTreeSet<&str> = b.iter().map(String::as_str).collect();
    let diff: Vec<&str> = sa.symmetric_difference(&sb).copied().collect();
    if diff.is_empty() {
        Err(Error::FeatureMismatch(
            "same features in a different column order".into(),
        ))
    } else {
        Err(Error::FeatureMismatch(format!(
            "symmetric difference [{}]",
            diff.join(", ")
        )))
    }
}
