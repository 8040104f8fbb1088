//! Passive-sensing analysis toolkit.
//!
//! The crate turns raw phone and wearable event streams into per-participant
//! digital biomarkers, labels participants from 10-item UCLA responses, and
//! runs the downstream analysis chain: group statistics with bootstrapped
//! effect sizes, leave-one-person-out classification and TreeSHAP feature
//! rankings. A seeded synthetic cohort generator provides end-to-end ground
//! truth.

pub mod eval;
pub mod explain;
pub mod features;
pub mod ingest;
pub mod labeling;
pub mod models;
pub mod numeric;
pub mod preprocess;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synthcohort;

pub use labeling::Category;
