//! Detection of prolific wiki editors at risk of leaving.
//!
//! The pipeline runs in stages: [`ingest`] raw editor data, build matched
//! missing/active [`cohort`]s, compute grouped [`features`], train and
//! ablate tree-ensemble classifiers in [`model`], and [`explain`] what
//! drives the predictions. [`stats`] holds the shared statistical tests and
//! [`synth`] generates synthetic fixtures.

pub mod artifact;
pub mod cohort;
pub mod explain;
pub mod features;
pub mod ingest;
pub mod model;
pub mod stats;
pub mod synth;
