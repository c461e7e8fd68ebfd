//! Per-subject feature tables: loading, validation and ICV normalization.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the value columns hold. Volumes must be nonnegative; embeddings
/// produced by an external feature extractor may take any finite value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    #[default]
    Volume,
    Embedding,
}

/// Rows are subjects, columns are named features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    subject_ids: Vec<String>,
    feature_names: Vec<String>,
    values: DMatrix<f64>,
    qc: Option<Vec<f64>>,
    icv: Option<Vec<f64>>,
    normalized: bool,
    kind: ValueKind,
}

impl FeatureTable {
    /// Builds an un-normalized volume table, checking every invariant.
    pub fn new(
        subject_ids: Vec<String>,
        feature_names: Vec<String>,
        values: DMatrix<f64>,
        qc: Option<Vec<f64>>,
        icv: Option<Vec<f64>>,
    ) -> Result<Self> {
        Self::with_kind(subject_ids, feature_names, values, qc, icv, ValueKind::Volume)
    }

    /// Builds a table of unconstrained embedding vectors.
    pub fn embeddings(
        subject_ids: Vec<String>,
        feature_names: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        Self::with_kind(subject_ids, feature_names, values, None, None, ValueKind::Embedding)
    }

    pub fn with_kind(
        subject_ids: Vec<String>,
        feature_names: Vec<String>,
        values: DMatrix<f64>,
        qc: Option<Vec<f64>>,
        icv: Option<Vec<f64>>,
        kind: ValueKind,
    ) -> Result<Self> {
        let table = FeatureTable {
            subject_ids,
            feature_names,
            values,
            qc,
            icv,
            normalized: false,
            kind,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        let n = self.subject_ids.len();
        if self.values.nrows() != n {
            return Err(Error::InvalidTable(format!(
                "{} subject ids but {} value rows",
                n,
                self.values.nrows()
            )));
        }
        if self.values.ncols() != self.feature_names.len() {
            return Err(Error::InvalidTable(format!(
                "{} feature names but {} value columns",
                self.feature_names.len(),
                self.values.ncols()
            )));
        }
        for (label, column) in [("qc", &self.qc), ("icv", &self.icv)] {
            if let Some(c) = column {
                if c.len() != n {
                    return Err(Error::InvalidTable(format!(
                        "{label} column has {} entries for {n} subjects",
                        c.len()
                    )));
                }
            }
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &self.subject_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateSubject(id.clone()));
            }
        }
        let mut seen = HashSet::with_capacity(self.feature_names.len());
        for name in &self.feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        for j in 0..self.values.ncols() {
            for i in 0..n {
                let v = self.values[(i, j)];
                let bad = if !v.is_finite() {
                    Some("non-finite value")
                } else if v < 0.0 && self.kind == ValueKind::Volume {
                    Some("negative volume")
                } else {
                    None
                };
                if let Some(reason) = bad {
                    return Err(Error::InvalidTable(format!(
                        "{reason} {v} for subject `{}`, feature `{}`",
                        self.subject_ids[i], self.feature_names[j]
                    )));
                }
            }
        }
        if let Some(qc) = &self.qc {
            for (id, &q) in self.subject_ids.iter().zip(qc) {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::InvalidTable(format!(
                        "QC score {q} for subject `{id}` is outside [0, 1]"
                    )));
                }
            }
        }
        if let Some(icv) = &self.icv {
            if let Some((id, v)) = self.subject_ids.iter().zip(icv).find(|(_, v)| !v.is_finite()) {
                return Err(Error::InvalidIcv {
                    subject: id.clone(),
                    value: *v,
                });
            }
        }
        Ok(())
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn qc(&self) -> Option<&[f64]> {
        self.qc.as_deref()
    }

    pub fn icv(&self) -> Option<&[f64]> {
        self.icv.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.feature_names.iter().position(|f| f == name)?;
        Some(self.values.column(j).iter().copied().collect())
    }

    /// Subset of rows in the given order. Indices must be in range and
    /// distinct.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        let d = self.n_features();
        let values = DMatrix::from_fn(rows.len(), d, |i, j| self.values[(rows[i], j)]);
        FeatureTable {
            subject_ids: rows.iter().map(|&r| self.subject_ids[r].clone()).collect(),
            feature_names: self.feature_names.clone(),
            values,
            qc: self.qc.as_ref().map(|q| rows.iter().map(|&r| q[r]).collect()),
            icv: self.icv.as_ref().map(|c| rows.iter().map(|&r| c[r]).collect()),
            normalized: self.normalized,
            kind: self.kind,
        }
    }

    /// Same table with feature columns in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<FeatureTable> {
        let idx = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::MissingColumn(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = DMatrix::from_fn(self.n_subjects(), idx.len(), |i, j| self.values[(i, idx[j])]);
        let mut out = self.clone();
        out.feature_names = names.to_vec();
        out.values = values;
        out.validate()?;
        Ok(out)
    }

    pub(crate) fn replace_features(&self, names: Vec<String>, values: DMatrix<f64>) -> Result<FeatureTable> {
        let mut out = self.clone();
        out.feature_names = names;
        out.values = values;
        out.validate()?;
        Ok(out)
    }

    /// Writes the table as comma-separated text with columns
    /// `subject[,qc][,icv],features...`. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |source| Error::Csv {
            path: "<output>".into(),
            source,
        };
        let mut header = vec!["subject".to_string()];
        if self.qc.is_some() {
            header.push("qc".into());
        }
        if self.icv.is_some() {
            header.push("icv".into());
        }
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.n_subjects() {
            let mut record = vec![self.subject_ids[i].clone()];
            if let Some(q) = &self.qc {
                record.push(q[i].to_string());
            }
            if let Some(c) = &self.icv {
                record.push(c[i].to_string());
            }
            record.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<output>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Divides every feature by the row's intracranial volume.
pub fn normalize_by_icv(t: &FeatureTable) -> Result<FeatureTable> {
    if t.normalized {
        return Err(Error::AlreadyNormalized);
    }
    let icv = t.icv.as_ref().ok_or(Error::MissingIcv)?;
    for (id, &v) in t.subject_ids.iter().zip(icv) {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidIcv {
                subject: id.clone(),
                value: v,
            });
        }
    }
    let mut values = t.values.clone();
    for (i, mut row) in values.row_iter_mut().enumerate() {
        row /= icv[i];
    }
    let mut out = t.clone();
    out.values = values;
    out.normalized = true;
    Ok(out)
}

/// Which columns of a delimited file play which role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub subject: String,
    #[serde(default)]
    pub qc: Option<String>,
    #[serde(default)]
    pub icv: Option<String>,
    #[serde(default)]
    pub features: FeatureColumns,
}

/// Either an explicit list of feature columns or the keyword `"all"`
/// (every column not bound to another role).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureColumns {
    Named(Vec<String>),
    Keyword(String),
}

impl Default for FeatureColumns {
    fn default() -> Self {
        FeatureColumns::Keyword("all".into())
    }
}

impl TableSchema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Guesses roles from a header row: `subject` (or the first column) is
    /// the id, and `qc` / `icv` are bound when present.
    pub fn infer(headers: &[String]) -> Self {
        let subject = if headers.iter().any(|h| h == "subject") {
            "subject".to_string()
        } else {
            headers.first().cloned().unwrap_or_else(|| "subject".into())
        };
        let present = |name: &str| headers.iter().any(|h| h == name).then(|| name.to_string());
        TableSchema {
            subject,
            qc: present("qc"),
            icv: present("icv"),
            features: FeatureColumns::default(),
        }
    }
}

/// Options controlling how strictly rows are validated on load.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Drop rows with an invalid cell instead of failing.
    pub drop_invalid_rows: bool,
    pub kind: ValueKind,
}

/// A row removed by [`LoadOptions::drop_invalid_rows`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedRow {
    pub line: u64,
    pub subject: String,
    pub reason: String,
}

/// Reads the header row of a delimited file.
pub fn read_headers(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    let delim = detect_delimiter(&first);
    Ok(first
        .trim_end_matches(['\r', '\n'])
        .split(delim as char)
        .map(|s| s.trim().to_string())
        .collect())
}

fn detect_delimiter(header_line: &str) -> u8 {
    let commas = header_line.matches(',').count();
    let tabs = header_line.matches('\t').count();
    if tabs > commas {
        b'\t'
    } else {
        b','
    }
}

/// Loads and validates a feature table from comma- or tab-separated text.
pub fn load_table(path: &Path, schema: &TableSchema, options: LoadOptions) -> Result<FeatureTable> {
    load_table_report(path, schema, options).map(|(t, _)| t)
}

/// As [`load_table`], also returning the rows dropped under
/// `drop_invalid_rows`.
pub fn load_table_report(
    path: &Path,
    schema: &TableSchema,
    options: LoadOptions,
) -> Result<(FeatureTable, Vec<DroppedRow>)> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    parse_table(&text, schema, options).map_err(|e| match e {
        Error::Csv { source, .. } => Error::Csv {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parses delimited text already held in memory.
pub fn parse_table(
    text: &str,
    schema: &TableSchema,
    options: LoadOptions,
) -> Result<(FeatureTable, Vec<DroppedRow>)> {
    let delim = detect_delimiter(text.lines().next().unwrap_or(""));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delim)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let csv_err = |source| Error::Csv {
        path: "<input>".into(),
        source,
    };
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();

    let mut seen = HashSet::new();
    for h in &headers {
        if h.is_empty() {
            return Err(Error::InvalidTable("empty column name in header".into()));
        }
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let subject_col = find(&schema.subject)?;
    let qc_col = schema.qc.as_deref().map(find).transpose()?;
    let icv_col = schema.icv.as_deref().map(find).transpose()?;
    let feature_cols: Vec<usize> = match &schema.features {
        FeatureColumns::Named(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        FeatureColumns::Keyword(k) if matches!(k.as_str(), "all" | "remaining" | "all remaining") => (0
            ..headers.len())
            .filter(|&j| j != subject_col && Some(j) != qc_col && Some(j) != icv_col)
            .collect(),
        FeatureColumns::Keyword(k) => {
            return Err(Error::InvalidArgument(format!(
                "unknown feature selector `{k}` (expected a list of columns or \"all\")"
            )))
        }
    };
    let mut seen = HashSet::new();
    for &j in &feature_cols {
        if j == subject_col || Some(j) == qc_col || Some(j) == icv_col {
            return Err(Error::InvalidArgument(format!(
                "column `{}` is bound to two roles",
                headers[j]
            )));
        }
        if !seen.insert(j) {
            return Err(Error::DuplicateColumn(headers[j].clone()));
        }
    }

    let mut ids = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut qc = Vec::new();
    let mut icv = Vec::new();
    let mut dropped = Vec::new();
    let mut id_set = HashSet::new();

    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let subject = record[subject_col].to_string();

        let parsed = (|| -> Result<(Vec<f64>, Option<f64>, Option<f64>)> {
            if subject.is_empty() {
                return Err(invalid(line, &headers[subject_col], "", "empty subject id"));
            }
            let mut row = Vec::with_capacity(feature_cols.len());
            for &j in &feature_cols {
                let v = parse_cell(&record[j], line, &headers[j])?;
                if v < 0.0 && options.kind == ValueKind::Volume {
                    return Err(invalid(line, &headers[j], &record[j], "negative volume"));
                }
                row.push(v);
            }
            let q = match qc_col {
                Some(j) => {
                    let q = parse_cell(&record[j], line, &headers[j])?;
                    if !(0.0..=1.0).contains(&q) {
                        return Err(invalid(line, &headers[j], &record[j], "QC score outside [0, 1]"));
                    }
                    Some(q)
                }
                None => None,
            };
            let c = icv_col.map(|j| parse_cell(&record[j], line, &headers[j])).transpose()?;
            Ok((row, q, c))
        })();

        match parsed {
            Ok((row, q, c)) => {
                if !id_set.insert(subject.clone()) {
                    return Err(Error::DuplicateSubject(subject));
                }
                ids.push(subject);
                rows.extend(row);
                qc.extend(q);
                icv.extend(c);
            }
            Err(e) if options.drop_invalid_rows => dropped.push(DroppedRow {
                line,
                subject,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }

    let n = ids.len();
    let values = DMatrix::from_row_slice(n, feature_cols.len(), &rows);
    let names = feature_cols.iter().map(|&j| headers[j].clone()).collect();
    let table = FeatureTable::with_kind(
        ids,
        names,
        values,
        qc_col.map(|_| qc),
        icv_col.map(|_| icv),
        options.kind,
    )?;
    Ok((table, dropped))
}

fn invalid(line: u64, column: &str, value: &str, reason: &'static str) -> Error {
    Error::InvalidCell {
        line,
        column: column.to_string(),
        value: value.to_string(),
        reason,
    }
}

fn parse_cell(cell: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| invalid(line, column, cell, "not a number"))?;
    if !v.is_finite() {
        return Err(invalid(line, column, cell, "non-finite value"));
    }
    Ok(v)
}
