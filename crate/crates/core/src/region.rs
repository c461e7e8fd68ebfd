//! Mapping raw segmentation regions onto bilateral measures.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::FeatureTable;

const SYNTHSEG_52: &str = include_str!("../config/synthseg_bilateral_52.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
}

/// One output measure: a midline structure (one input) or a left/right pair
/// (two inputs, averaged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub output_name: String,
    pub inputs: Vec<String>,
    #[serde(default)]
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub entries: Vec<RegionEntry>,
    pub icv_column: String,
    pub qc_column: String,
}

impl RegionMap {
    pub fn new(entries: Vec<RegionEntry>, icv_column: String, qc_column: String) -> Result<Self> {
        let map = RegionMap {
            entries,
            icv_column,
            qc_column,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        let mut outputs = HashSet::new();
        let mut inputs = HashSet::new();
        for e in &self.entries {
            if !outputs.insert(e.output_name.as_str()) {
                return Err(Error::InvalidRegionMap(format!(
                    "output `{}` defined twice",
                    e.output_name
                )));
            }
            if !(1..=2).contains(&e.inputs.len()) {
                return Err(Error::InvalidRegionMap(format!(
                    "entry `{}` has {} inputs; expected 1 (midline) or 2 (left/right)",
                    e.output_name,
                    e.inputs.len()
                )));
            }
            for i in &e.inputs {
                if !inputs.insert(i.as_str()) {
                    return Err(Error::InvalidRegionMap(format!("input column `{i}` used twice")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: RegionMap = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The bundled 52-measure map over SynthSeg volume column names.
    ///
    /// This is a reconstruction: 14 subcortical left/right pairs, 4 midline
    /// structures and the 34 Desikan-Killiany cortical pairs.
    pub fn synthseg_52() -> Self {
        Self::from_json(SYNTHSEG_52).expect("bundled region map is valid")
    }

    pub fn output_names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.output_name.clone()).collect()
    }

    pub fn input_names(&self) -> Vec<String> {
        self.entries.iter().flat_map(|e| e.inputs.iter().cloned()).collect()
    }
}

/// Collapses source columns onto the map's output measures.
pub fn apply_region_map(t: &FeatureTable, m: &RegionMap) -> Result<FeatureTable> {
    if t.is_normalized() {
        return Err(Error::AlreadyNormalized);
    }
    m.validate()?;
    let names = t.feature_names();
    let index = |name: &String| {
        names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))
    };
    let sources = m
        .entries
        .iter()
        .map(|e| e.inputs.iter().map(index).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    let src = t.values();
    let values = DMatrix::from_fn(t.n_subjects(), m.entries.len(), |i, k| match sources[k][..] {
        [a] => src[(i, a)],
        [a, b] => (src[(i, a)] + src[(i, b)]) / 2.0,
        _ => unreachable!("validated entry arity"),
    });
    t.replace_features(m.output_names(), values)
}
