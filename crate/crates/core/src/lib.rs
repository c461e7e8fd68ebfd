//! Morphometric distance between cohorts of regional brain volumes.
//!
//! Each cohort is a [`FeatureTable`] of per-subject regional volumes. Tables
//! are mapped to bilateral measures ([`RegionMap`]), normalized by
//! intracranial volume and QC-filtered, then summarised by a Gaussian fit.
//! The WASABI score is the closed-form squared 2-Wasserstein distance
//! between the two fitted Gaussians:
//!
//! ```text
//! W2²(X, Y) = ‖μx − μy‖² + Tr(Σx + Σy − 2 (Σx^½ Σy Σx^½)^½)
//! ```
//!
//! Around that core the crate provides the baseline metrics (Fréchet distance
//! on arbitrary embeddings, kernel MMD), the bootstrap protocol used to turn a
//! single score into a distribution, a Henze-Zirkler normality check, an exact
//! optimal-transport oracle and a seeded synthetic-cohort generator.
//!
//! ```
//! use nalgebra::DMatrix;
//! use wasabi_core::frechet_distance;
//!
//! let x = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
//! let y = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
//! let d = frechet_distance(&x, &y).unwrap();
//! assert!((d.value - 1.0).abs() < 1e-12);
//! ```

pub mod compare;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod mmd;
pub mod ot;
pub mod qc;
pub mod region;
pub mod seed;
pub mod stats;
pub mod synthgen;
pub mod table;

pub use compare::{run_comparison, ComparisonProtocol, ComparisonReport, ComparisonRow, Dataset};
pub use error::{Error, Result};
pub use gaussian::{
    fit_gaussian, fit_matrix, frechet_distance, w2_squared, wasabi, CovarianceDivisor,
    DistanceResult, FitOptions, GaussianSummary, MetricKind,
};
pub use linalg::sqrt_psd;
pub use mmd::{mmd_permutation_pvalue, mmd_squared, Bandwidth, KernelKind, KernelSpec, MmdEstimator};
pub use ot::{
    empirical_w2_squared, empirical_w2_squared_1d, gaussian_vs_empirical_gap, GapReport,
    TransportPlan,
};
pub use qc::{filter_by_qc, qc_iqr_threshold};
pub use region::{apply_region_map, RegionEntry, RegionMap};
pub use stats::bootstrap::{run_bootstrap, within_cohort_null, BootstrapReport, MetricSpec};
pub use stats::cohens_d::{cohens_d, regional_cohens_d};
pub use stats::hz::{henze_zirkler, HzResult};
pub use stats::summary::Summary;
pub use synthgen::{generate_cohort, generate_scenario_suite, CohortSpec, ScenarioPair};
pub use table::{load_table, normalize_by_icv, FeatureTable, LoadOptions, TableSchema, ValueKind};
