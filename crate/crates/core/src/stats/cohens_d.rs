use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::check_same_features;
use crate::stats::summary::{mean, variance};
use crate::table::FeatureTable;

/// Standardized mean difference with the pooled (n − 1) standard deviation.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "Cohen's d needs at least 2 values per group, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (n, m) = (x.len() as f64, y.len() as f64);
    let pooled = ((n - 1.0) * variance(x) + (m - 1.0) * variance(y)) / (n + m - 2.0);
    if !(pooled > 0.0) {
        return Err(Error::InvalidArgument("pooled variance is zero".into()));
    }
    Ok((mean(x) - mean(y)) / pooled.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionalEffect {
    pub feature: String,
    pub cohens_d: f64,
}

/// Cohen's d for every feature column of two tables with identical features.
pub fn regional_cohens_d(x: &FeatureTable, y: &FeatureTable) -> Result<Vec<RegionalEffect>> {
    check_same_features(x.feature_names(), y.feature_names())?;
    x.feature_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let a: Vec<f64> = x.values().column(j).iter().copied().collect();
            let b: Vec<f64> = y.values().column(j).iter().copied().collect();
            Ok(RegionalEffect {
                feature: name.clone(),
                cohens_d: cohens_d(&a, &b)?,
            })
        })
        .collect()
}
