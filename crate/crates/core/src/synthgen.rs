//! Seeded synthetic cohorts with known Gaussian ground truth.
//!
//! A [`CohortSpec`] describes the distribution of ICV-normalized measures.
//! Generated tables hold raw volumes (`measure × icv`) together with QC and
//! ICV columns, so the usual normalize-then-fit pipeline recovers draws from
//! the specified Gaussian.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, psd_eigen};
use crate::seed::sub_seed;
use crate::table::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcDistribution {
    pub base: f64,
    pub jitter_sd: f64,
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default)]
    pub outlier_value: f64,
}

impl Default for QcDistribution {
    fn default() -> Self {
        QcDistribution {
            base: 0.78,
            jitter_sd: 0.01,
            outlier_fraction: 0.0,
            outlier_value: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcvDistribution {
    pub mean: f64,
    pub sd: f64,
}

impl Default for IcvDistribution {
    fn default() -> Self {
        IcvDistribution {
            mean: 1.5e6,
            sd: 1.5e5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub name: String,
    pub mean: Vec<f64>,
    /// Row-major covariance of the normalized measures.
    pub cov: Vec<Vec<f64>>,
    pub n: usize,
    #[serde(default)]
    pub qc_distribution: QcDistribution,
    #[serde(default)]
    pub icv_distribution: IcvDistribution,
    /// Column names; defaults to `f0, f1, ...`.
    #[serde(default)]
    pub feature_names: Option<Vec<String>>,
}

impl CohortSpec {
    /// Independent features with a common mean and standard deviation.
    pub fn isotropic(name: &str, d: usize, mean: f64, sd: f64, n: usize) -> Self {
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { sd * sd } else { 0.0 }).collect())
            .collect();
        CohortSpec {
            name: name.into(),
            mean: vec![mean; d],
            cov,
            n,
            qc_distribution: QcDistribution::default(),
            icv_distribution: IcvDistribution::default(),
            feature_names: None,
        }
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_matrix(&self) -> Result<DMatrix<f64>> {
        let d = self.d();
        if self.cov.len() != d || self.cov.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument(format!(
                "cohort `{}`: covariance must be {d}×{d}",
                self.name
            )));
        }
        Ok(DMatrix::from_fn(d, d, |i, j| self.cov[i][j]))
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_names
            .clone()
            .unwrap_or_else(|| (0..self.d()).map(|j| format!("f{j}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("cohort `{}`: {msg}", self.name)));
        if self.d() == 0 {
            return bad("empty mean vector".into());
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.feature_names().len() != self.d() {
            return bad("feature_names length differs from mean".into());
        }
        let q = &self.qc_distribution;
        if !(q.jitter_sd >= 0.0 && (0.0..=1.0).contains(&q.outlier_fraction)) {
            return bad("invalid qc_distribution".into());
        }
        let icv = &self.icv_distribution;
        if !(icv.mean > 0.0 && icv.sd >= 0.0) {
            return bad("icv_distribution needs positive mean and nonnegative sd".into());
        }
        self.cov_matrix()?;
        Ok(())
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let spec: CohortSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Draws from `N(mean, L Lᵀ)`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    /// Factorizes `cov` by Cholesky. A PSD but singular covariance is
    /// repaired with a growing ridge; the zero matrix gives a point mass.
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d {
            return Err(Error::DimensionMismatch(d, cov.nrows()));
        }
        check_symmetric(cov)?;
        psd_eigen(cov)?;
        if cov.iter().all(|&v| v == 0.0) {
            return Ok(GaussianSampler {
                mean,
                factor: DMatrix::zeros(d, d),
            });
        }
        let mut ridge = 1e-10 * cov.trace() / d as f64;
        let mut attempt = cov.clone();
        for _ in 0..12 {
            if let Some(ch) = Cholesky::new(attempt.clone()) {
                return Ok(GaussianSampler { mean, factor: ch.l() });
            }
            attempt = cov + DMatrix::identity(d, d) * ridge;
            ridge *= 10.0;
        }
        Err(Error::Numerical("covariance could not be repaired to positive definite".into()))
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }

    fn draw_into<R: Rng>(&self, rng: &mut R, z: &mut DVector<f64>) -> DVector<f64> {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        &self.mean + &self.factor * &*z
    }

    /// `n` draws as the rows of a matrix.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let d = self.d();
        let mut z = DVector::zeros(d);
        let mut out = DMatrix::zeros(n, d);
        for i in 0..n {
            let x = self.draw_into(rng, &mut z);
            out.set_row(i, &x.transpose());
        }
        out
    }
}

/// Generates a cohort with `shift` added to the mean and the Gaussian factor
/// scaled by `scale`.
fn generate_with(spec: &CohortSpec, name: &str, shift: &DVector<f64>, scale: f64, seed: u64) -> Result<FeatureTable> {
    spec.validate()?;
    let cov = spec.cov_matrix()?;
    let sampler = GaussianSampler::new(DVector::from_column_slice(&spec.mean), &cov)?;
    let d = spec.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = spec.qc_distribution;
    let icv_dist = spec.icv_distribution;

    let mut values = DMatrix::zeros(spec.n, d);
    let mut qc = Vec::with_capacity(spec.n);
    let mut icv = Vec::with_capacity(spec.n);
    let mut z = DVector::zeros(d);
    for i in 0..spec.n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let measure = &sampler.mean + shift + (&sampler.factor * &z) * scale;
        let head = loop {
            let c = icv_dist.mean + icv_dist.sd * rng.sample::<f64, _>(StandardNormal);
            if c > 0.0 {
                break c;
            }
        };
        let jitter: f64 = rng.sample(StandardNormal);
        let outlier = rng.random::<f64>() < q.outlier_fraction;
        let score = if outlier { q.outlier_value } else { q.base + q.jitter_sd * jitter };
        values.set_row(i, &(measure * head).transpose());
        qc.push(score.clamp(0.0, 1.0));
        icv.push(head);
    }
    FeatureTable::new(
        (0..spec.n).map(|i| format!("{name}_{i}")).collect(),
        spec.feature_names(),
        values,
        Some(qc),
        Some(icv),
    )
    .map_err(|e| Error::InvalidArgument(format!("cohort `{name}` produced an invalid table ({e}); raise the mean relative to the spread")))
}

/// Draws one cohort. Subject ids are `{name}_{index}`.
pub fn generate_cohort(spec: &CohortSpec, seed: u64) -> Result<FeatureTable> {
    generate_with(spec, &spec.name, &DVector::zeros(spec.d()), 1.0, seed)
}

/// One controlled contrast of a scenario suite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPair {
    pub effect_size: f64,
    pub reference: FeatureTable,
    pub candidate: FeatureTable,
    /// Population W2² between the two generating Gaussians.
    pub ground_truth_w2: f64,
}

/// Unit direction along which scenario means are shifted.
pub fn shift_direction(d: usize) -> DVector<f64> {
    DVector::from_element(d, 1.0 / (d as f64).sqrt())
}

/// Mean shift for a given effect size: `effect · √diag(Σ) ∘ u`.
pub fn scenario_shift(spec: &CohortSpec, effect_size: f64) -> DVector<f64> {
    let u = shift_direction(spec.d());
    DVector::from_fn(spec.d(), |j, _| effect_size * spec.cov[j][j].sqrt() * u[j])
}

/// Reference cohort paired with progressively shifted candidates.
///
/// The reference and the candidate are independent draws; all candidates
/// reuse the same underlying normal variates, so pair `k` differs from the
/// null pair only by its mean shift.
pub fn generate_scenario_suite(base: &CohortSpec, effect_sizes: &[f64], seed: u64) -> Result<Vec<ScenarioPair>> {
    generate_scenario_suite_scaled(base, effect_sizes, 1.0, seed)
}

/// As [`generate_scenario_suite`], with candidate covariances scaled by
/// `cov_scale²` (covariance-difference scenarios).
pub fn generate_scenario_suite_scaled(
    base: &CohortSpec,
    effect_sizes: &[f64],
    cov_scale: f64,
    seed: u64,
) -> Result<Vec<ScenarioPair>> {
    if effect_sizes.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("effect sizes must start with 0 (the null pair)".into()));
    }
    if effect_sizes.windows(2).any(|w| !(w[1] > w[0])) || effect_sizes.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidArgument("effect sizes must be finite and strictly ascending".into()));
    }
    if !(cov_scale.is_finite() && cov_scale > 0.0) {
        return Err(Error::InvalidArgument("cov_scale must be positive".into()));
    }
    let d = base.d();
    let reference = generate_with(base, &base.name, &DVector::zeros(d), 1.0, sub_seed(seed, 0, 0))?;
    let trace: f64 = (0..d).map(|j| base.cov[j][j]).sum();
    effect_sizes
        .iter()
        .enumerate()
        .map(|(k, &effect)| {
            let shift = scenario_shift(base, effect);
            let name = format!("{}_effect{k}", base.name);
            let candidate = generate_with(base, &name, &shift, cov_scale, sub_seed(seed, 0, 1))?;
            Ok(ScenarioPair {
                effect_size: effect,
                reference: reference.clone(),
                candidate,
                ground_truth_w2: shift.norm_squared() + (1.0 - cov_scale).powi(2) * trace,
            })
        })
        .collect()
}
