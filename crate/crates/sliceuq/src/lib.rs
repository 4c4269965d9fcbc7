//! Slice-level uncertainty toolkit for 3D segmentation ensembles.
//!
//! Given a co-registered ensemble of probability maps for a case, this
//! crate aggregates them into a consensus label, computes three per-slice
//! uncertainty measures, correlates them with ground-truth-based metrics
//! (Dice, surface distances), fits linear models that predict per-slice
//! performance from uncertainty, and Gaussian-smooths only the slices
//! whose predicted Hausdorff distance exceeds a threshold.
//!
//! Volumes travel as MetaImage (.mhd/.raw); reports as CSV and JSON.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod mhd;
pub mod phantom;
pub mod postprocess;
pub mod records;
pub mod regression;
pub mod uncertainty;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{ElementKind, Volume};
