//! Multi-dataset comparison against one reference cohort.
//!
//! The first row is the within-reference null (two random halves of the
//! reference); every candidate row is a reference-vs-candidate bootstrap.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::qc::{filter_by_qc, qc_iqr_threshold};
use crate::stats::bootstrap::{run_bootstrap, within_cohort_null, BootstrapReport, MetricSpec};
use crate::stats::summary::{mean, variance};
use crate::table::FeatureTable;

/// A named, preprocessed (mapped and normalized) but not yet QC-filtered
/// table.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub table: FeatureTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonProtocol {
    pub sample_size: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Explicit QC cutoff; when absent it is derived from the reference by
    /// the IQR rule.
    pub qc_threshold: Option<f64>,
    pub metrics: Vec<MetricSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub dataset_name: String,
    pub is_null_row: bool,
    pub qc_mean: Option<f64>,
    pub qc_sd: Option<f64>,
    pub n_total: usize,
    pub n_retained: usize,
    /// Per-metric mean and sd of the bootstrap values; absent when the
    /// dataset could not be evaluated.
    pub metrics: Option<BTreeMap<String, MetricSummary>>,
    pub bootstraps: Vec<BootstrapReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedProtocol {
    pub sample_size: usize,
    pub repeats: usize,
    pub seed: u64,
    pub qc_threshold: Option<f64>,
    pub qc_threshold_source: String,
    pub metrics: Vec<MetricSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub reference_name: String,
    pub protocol: ResolvedProtocol,
    pub rows: Vec<ComparisonRow>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

fn qc_stats(t: &FeatureTable) -> (Option<f64>, Option<f64>) {
    match t.qc() {
        Some(q) if !q.is_empty() => {
            let sd = if q.len() > 1 { Some(variance(q).sqrt()) } else { None };
            (Some(mean(q)), sd)
        }
        _ => (None, None),
    }
}

fn apply_qc(t: &FeatureTable, threshold: Option<f64>) -> Result<FeatureTable> {
    match (threshold, t.qc()) {
        (Some(th), Some(_)) => Ok(filter_by_qc(t, th)?.0),
        _ => Ok(t.clone()),
    }
}

/// Label for a metric column, e.g. `wasabi`, `frechet`, `mmd`.
fn metric_key(m: &MetricSpec) -> String {
    m.name().to_string()
}

fn summarize(reports: &[BootstrapReport]) -> BTreeMap<String, MetricSummary> {
    reports
        .iter()
        .map(|r| {
            (
                metric_key(&r.metric),
                MetricSummary {
                    mean: r.summary.mean,
                    sd: r.summary.sd,
                },
            )
        })
        .collect()
}

/// Resolves the QC cutoff: explicit value first, then the IQR fence of the
/// reference QC scores, else no filtering.
pub fn resolve_qc_threshold(reference: &FeatureTable, explicit: Option<f64>) -> Result<(Option<f64>, String)> {
    if let Some(t) = explicit {
        return Ok((Some(t), "explicit".into()));
    }
    match reference.qc() {
        Some(q) if q.len() >= 4 => Ok((Some(qc_iqr_threshold(q)?), "iqr_rule_on_reference".into())),
        Some(_) => Ok((None, "too_few_reference_qc_values".into())),
        None => Ok((None, "no_qc_column".into())),
    }
}

/// Runs the within-reference null and every reference-vs-candidate
/// bootstrap. A candidate with fewer retained rows than `sample_size` after
/// QC is reported without metrics and with a warning.
pub fn run_comparison(
    reference: &Dataset,
    candidates: &[Dataset],
    protocol: &ComparisonProtocol,
) -> Result<ComparisonReport> {
    let (threshold, source) = resolve_qc_threshold(&reference.table, protocol.qc_threshold)?;
    let reference_kept = apply_qc(&reference.table, threshold)?;
    let mut warnings = Vec::new();

    let (qc_mean, qc_sd) = qc_stats(&reference.table);
    let null_reports = protocol
        .metrics
        .iter()
        .map(|m| within_cohort_null(&reference_kept, m, protocol.sample_size, protocol.repeats, protocol.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = vec![ComparisonRow {
        dataset_name: reference.name.clone(),
        is_null_row: true,
        qc_mean,
        qc_sd,
        n_total: reference.table.n_subjects(),
        n_retained: reference_kept.n_subjects(),
        metrics: Some(summarize(&null_reports)),
        bootstraps: null_reports,
        note: Some("within-reference null".into()),
    }];

    for c in candidates {
        let kept = apply_qc(&c.table, threshold)?;
        let (qc_mean, qc_sd) = qc_stats(&c.table);
        let mut row = ComparisonRow {
            dataset_name: c.name.clone(),
            is_null_row: false,
            qc_mean,
            qc_sd,
            n_total: c.table.n_subjects(),
            n_retained: kept.n_subjects(),
            metrics: None,
            bootstraps: Vec::new(),
            note: None,
        };
        if kept.n_subjects() < protocol.sample_size {
            let msg = format!(
                "{}: only {} of {} rows pass QC, fewer than the sample size {}; row omitted",
                c.name,
                kept.n_subjects(),
                c.table.n_subjects(),
                protocol.sample_size
            );
            row.note = Some("failed QC".into());
            warnings.push(msg);
        } else {
            let reports = protocol
                .metrics
                .iter()
                .map(|m| run_bootstrap(&reference_kept, &kept, m, protocol.sample_size, protocol.repeats, protocol.seed))
                .collect::<Result<Vec<_>>>()?;
            row.metrics = Some(summarize(&reports));
            row.bootstraps = reports;
        }
        rows.push(row);
    }

    Ok(ComparisonReport {
        reference_name: reference.name.clone(),
        protocol: ResolvedProtocol {
            sample_size: protocol.sample_size,
            repeats: protocol.repeats,
            seed: protocol.seed,
            qc_threshold: threshold,
            qc_threshold_source: source,
            metrics: protocol.metrics.clone(),
        },
        rows,
        warnings,
    })
}

fn fmt_value(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-2 && v.abs() < 1e5) {
        format!("{v:.3}")
    } else {
        format!("{v:.3e}")
    }
}

impl ComparisonReport {
    /// Aligned plain-text table with `mean(sd)` cells; the null row is
    /// marked with `*`. When `highlight` is set the null row is dimmed with
    /// ANSI escapes.
    pub fn to_text(&self, highlight: bool) -> String {
        let keys: Vec<String> = self.protocol.metrics.iter().map(metric_key).collect();
        let mut header = vec!["Dataset".to_string(), "QC".to_string()];
        header.extend(keys.iter().map(|k| k.to_uppercase()));
        let mut body: Vec<Vec<String>> = Vec::new();
        for row in &self.rows {
            let mut cells = vec![format!("{}{}", row.dataset_name, if row.is_null_row { " *" } else { "" })];
            cells.push(match (row.qc_mean, row.qc_sd) {
                (Some(m), Some(s)) => format!("{m:.2}({s:.2})"),
                (Some(m), None) => format!("{m:.2}"),
                _ => "--".into(),
            });
            for k in &keys {
                cells.push(match row.metrics.as_ref().and_then(|m| m.get(k)) {
                    Some(s) => format!("{}({})", fmt_value(s.mean), fmt_value(s.sd)),
                    None => "--".into(),
                });
            }
            body.push(cells);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|j| body.iter().map(|r| r[j].chars().count()).chain([header[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = String::new();
        let _ = writeln!(out, "Distance w.r.t. {}", self.reference_name);
        let _ = writeln!(out, "{}", line(&header));
        let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        for (row, cells) in self.rows.iter().zip(&body) {
            if highlight && row.is_null_row {
                let _ = writeln!(out, "\x1b[2m{}\x1b[0m", line(cells));
            } else {
                let _ = writeln!(out, "{}", line(cells));
            }
        }
        let _ = writeln!(
            out,
            "* within-reference null; n={} per side, {} repeats, seed {}",
            self.protocol.sample_size, self.protocol.repeats, self.protocol.seed
        );
        out
    }
}
