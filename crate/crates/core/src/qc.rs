//! QC-score thresholding.

use crate::error::{Error, Result};
use crate::stats::summary::quantile_sorted;
use crate::table::FeatureTable;

/// Lower outlier fence `Q1 − 1.5·(Q3 − Q1)` of the QC scores, with type-7
/// quartiles.
pub fn qc_iqr_threshold(qc_values: &[f64]) -> Result<f64> {
    if qc_values.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "IQR threshold needs at least 4 QC values, got {}",
            qc_values.len()
        )));
    }
    if qc_values.iter().any(|q| !q.is_finite()) {
        return Err(Error::InvalidArgument("non-finite QC value".into()));
    }
    let mut sorted = qc_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(q1 - 1.5 * (q3 - q1))
}

/// Keeps rows with `qc >= threshold`; returns the filtered table and the
/// ids of removed subjects in their original order.
pub fn filter_by_qc(t: &FeatureTable, threshold: f64) -> Result<(FeatureTable, Vec<String>)> {
    if threshold.is_nan() {
        return Err(Error::InvalidArgument("QC threshold is NaN".into()));
    }
    let qc = t.qc().ok_or(Error::MissingQc)?;
    let (keep, removed): (Vec<usize>, Vec<usize>) = (0..t.n_subjects()).partition(|&i| qc[i] >= threshold);
    let removed_ids = removed.iter().map(|&i| t.subject_ids()[i].clone()).collect();
    Ok((t.select_rows(&keep), removed_ids))
}
