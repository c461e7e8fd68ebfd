//! Shared input handling: load, map regions, normalize, QC filter.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use wasabi_core::compare::resolve_qc_threshold;
use wasabi_core::table::{load_table_report, read_headers, FeatureColumns};
use wasabi_core::{
    apply_region_map, filter_by_qc, normalize_by_icv, FeatureTable, LoadOptions, RegionMap, TableSchema, ValueKind,
};

pub const BUILTIN_MAP: &str = "builtin:synthseg-52";

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Region map JSON, or `builtin:synthseg-52`
    #[arg(long)]
    pub region_map: Option<String>,
    /// Column-role schema JSON (subject, qc, icv, features)
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Drop rows with invalid cells instead of failing
    #[arg(long)]
    pub drop_invalid_rows: bool,
    /// Treat values as embeddings: negatives allowed, no ICV normalization
    #[arg(long)]
    pub embeddings: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputInfo {
    pub path: String,
    pub rows: usize,
    pub dropped_rows: usize,
}

impl InputArgs {
    pub fn region_map(&self) -> Result<Option<RegionMap>> {
        match self.region_map.as_deref() {
            None => Ok(None),
            Some(BUILTIN_MAP) => Ok(Some(RegionMap::synthseg_52())),
            Some(p) => Ok(Some(
                RegionMap::from_json_file(Path::new(p)).with_context(|| format!("region map {p}"))?,
            )),
        }
    }

    fn schema_for(&self, path: &Path, map: Option<&RegionMap>) -> Result<TableSchema> {
        if let Some(s) = &self.schema {
            return TableSchema::from_json_file(s).with_context(|| format!("schema {}", s.display()));
        }
        let headers = read_headers(path)?;
        let mut schema = TableSchema::infer(&headers);
        if let Some(m) = map {
            let bind = |name: &str| headers.iter().any(|h| h == name).then(|| name.to_string());
            schema.icv = bind(&m.icv_column).or(schema.icv);
            schema.qc = bind(&m.qc_column).or(schema.qc);
            schema.features = FeatureColumns::Named(m.input_names());
        }
        Ok(schema)
    }

    /// Loads one table, applies the region map and, for volume tables that
    /// carry an ICV column, normalizes it.
    pub fn prepare(&self, path: &Path) -> Result<(FeatureTable, InputInfo)> {
        self.load(path, true)
    }

    /// As [`prepare`](Self::prepare) without ICV normalization.
    pub fn prepare_raw(&self, path: &Path) -> Result<(FeatureTable, InputInfo)> {
        self.load(path, false)
    }

    fn load(&self, path: &Path, normalize: bool) -> Result<(FeatureTable, InputInfo)> {
        let map = self.region_map()?;
        let schema = self.schema_for(path, map.as_ref())?;
        let kind = if self.embeddings {
            ValueKind::Embedding
        } else {
            ValueKind::Volume
        };
        let opts = LoadOptions {
            drop_invalid_rows: self.drop_invalid_rows,
            kind,
        };
        let (mut table, dropped) =
            load_table_report(path, &schema, opts).with_context(|| format!("loading {}", path.display()))?;
        if let Some(m) = &map {
            if self.embeddings {
                bail!("--region-map applies to volume tables, not --embeddings");
            }
            table = apply_region_map(&table, m).with_context(|| format!("region map on {}", path.display()))?;
        }
        if normalize && kind == ValueKind::Volume && table.icv().is_some() {
            table = normalize_by_icv(&table).with_context(|| format!("normalizing {}", path.display()))?;
        }
        let info = InputInfo {
            path: path.display().to_string(),
            rows: table.n_subjects(),
            dropped_rows: dropped.len(),
        };
        Ok((table, info))
    }
}

/// Threshold and where it came from, recorded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct QcDecision {
    pub qc_threshold: Option<f64>,
    pub qc_threshold_source: String,
}

pub fn decide_qc(reference: &FeatureTable, explicit: Option<f64>) -> Result<QcDecision> {
    let (qc_threshold, qc_threshold_source) = resolve_qc_threshold(reference, explicit)?;
    Ok(QcDecision {
        qc_threshold,
        qc_threshold_source,
    })
}

pub fn apply_qc(t: &FeatureTable, qc: &QcDecision) -> Result<FeatureTable> {
    match (qc.qc_threshold, t.qc()) {
        (Some(th), Some(_)) => Ok(filter_by_qc(t, th)?.0),
        _ => Ok(t.clone()),
    }
}
