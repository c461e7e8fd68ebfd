//! Supporting statistics: effect sizes, normality testing and the
//! bootstrap resampling engine.

pub mod bootstrap;
pub mod cohens_d;
pub mod hz;
pub mod summary;
