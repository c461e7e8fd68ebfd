//! Henze-Zirkler test of multivariate normality.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::gaussian::RIDGE_TRIGGER;
use crate::linalg::{psd_eigen, reassemble, symmetrize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HzResult {
    pub statistic: f64,
    /// Smoothing parameter β.
    pub beta: f64,
    pub pvalue: f64,
    pub n: usize,
    pub d: usize,
}

/// Optimal smoothing parameter `β = ((n(2d+1))/4)^{1/(d+4)} / √2`.
pub fn hz_beta(n: usize, d: usize) -> f64 {
    let (n, d) = (n as f64, d as f64);
    (n * (2.0 * d + 1.0) / 4.0).powf(1.0 / (d + 4.0)) / 2f64.sqrt()
}

/// Mean and variance of the statistic under normality, used to fit the
/// lognormal approximation of its null distribution.
pub fn hz_null_moments(beta: f64, d: usize) -> (f64, f64) {
    let p = d as f64;
    let b2 = beta * beta;
    let b4 = b2 * b2;
    let b8 = b4 * b4;
    let a = 1.0 + 2.0 * b2;
    let w = (1.0 + b2) * (1.0 + 3.0 * b2);
    let mean = 1.0 - a.powf(-p / 2.0) * (1.0 + p * b2 / a + p * (p + 2.0) * b4 / (2.0 * a * a));
    let var = 2.0 * (1.0 + 4.0 * b2).powf(-p / 2.0)
        + 2.0 * a.powf(-p) * (1.0 + 2.0 * p * b4 / (a * a) + 3.0 * p * (p + 2.0) * b8 / (4.0 * a.powi(4)))
        - 4.0 * w.powf(-p / 2.0) * (1.0 + 3.0 * p * b4 / (2.0 * w) + p * (p + 2.0) * b8 / (2.0 * w * w));
    (mean, var)
}

/// Runs the test on the rows of `data`.
///
/// Rows are centred and whitened with the maximum-likelihood (divisor n)
/// covariance, so the statistic is invariant under invertible affine maps.
pub fn henze_zirkler(data: &DMatrix<f64>) -> Result<HzResult> {
    let (n, d) = data.shape();
    if d == 0 {
        return Err(Error::InvalidArgument("no columns".into()));
    }
    if n <= d {
        return Err(Error::InsufficientData(format!(
            "Henze-Zirkler needs more rows than columns, got n={n}, d={d}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value".into()));
    }
    let mean: DVector<f64> = data.row_sum().transpose() / n as f64;
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = symmetrize(&(centered.transpose() * &centered / n as f64));
    let eig = psd_eigen(&cov)?;
    let trace = cov.trace();
    let min = eig.eigenvalues.min();
    if !(trace > 0.0) || min < RIDGE_TRIGGER * trace / d as f64 {
        return Err(Error::SingularCovariance { min, trace });
    }
    let whitener = reassemble(&eig, |l| 1.0 / l.sqrt());
    let z = centered * whitener;

    let rows: Vec<Vec<f64>> = z.row_iter().map(|r| r.iter().copied().collect()).collect();
    let beta = hz_beta(n, d);
    let b2 = beta * beta;
    let p = d as f64;

    let mut pair_sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let djk: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            pair_sum += (-b2 / 2.0 * djk).exp();
        }
    }
    let single_sum: f64 = rows
        .iter()
        .map(|r| {
            let dj: f64 = r.iter().map(|v| v * v).sum();
            (-b2 / (2.0 * (1.0 + b2)) * dj).exp()
        })
        .sum();
    let nf = n as f64;
    let statistic = pair_sum / nf - 2.0 * (1.0 + b2).powf(-p / 2.0) * single_sum
        + nf * (1.0 + 2.0 * b2).powf(-p / 2.0);

    let (mu, var) = hz_null_moments(beta, d);
    let log_mean = (mu.powi(4) / (var + mu * mu)).sqrt().ln();
    let log_sd = ((var + mu * mu) / (mu * mu)).ln().sqrt();
    let pvalue = if statistic > 0.0 {
        Normal::standard().sf((statistic.ln() - log_mean) / log_sd)
    } else {
        1.0
    };
    Ok(HzResult {
        statistic,
        beta,
        pvalue: pvalue.clamp(0.0, 1.0),
        n,
        d,
    })
}
