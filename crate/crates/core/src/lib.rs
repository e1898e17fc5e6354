//! Joint segmentation and semantic labeling of a batch of tagged images.
//!
//! The engine runs in two phases. Phase I iterates superpixel grouping
//! (a multicut with mask incentives), exemplar-SVM training on confident
//! regions, and mask propagation by sliding-window detection until the
//! regions stop changing. Phase II builds one graphical model over every
//! region of the batch and assigns labels with alpha-expansion.
//!
//! Module map:
//!
//! - [`corpus`]: images, superpixels, partitions, regions, propagations.
//! - [`features`]: appearance histograms, chi-square distance, HOG.
//! - [`grouping`]: multicut solver and its exhaustive oracle.
//! - [`esvm`]: region selection, exemplar training, calibration, detection.
//! - [`colabel`]: label models and co-labeling energies.
//! - [`graphcut`]: max-flow, alpha-expansion and an exhaustive MAP oracle.
//! - [`pipeline`]: configuration, both phases, evaluation, cross validation.
//! - [`synthgen`]: deterministic synthetic corpora with exact ground truth.

pub mod colabel;
pub mod corpus;
pub mod error;
pub mod esvm;
pub mod features;
pub mod graphcut;
pub mod grouping;
pub mod io;
pub mod pipeline;
pub mod raster;
mod seed;
pub mod synthgen;

pub use error::{Error, Result};
