//! Supervised PCA-Net change detection for co-registered temporal SAR image pairs.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`raster`] holds the image model, binary PGM I/O and the log-ratio difference map.
//! * [`pcanet`] learns the two-stage eigenfilter cascade and encodes per-pixel features
//!   by binary hashing and block histograms.
//! * [`sampling`] splits a reference map into boundary / inner-changed / inner-unchanged
//!   sets and draws training samples (`uc`, `buc`, `obuc`, pseudolabel, generalization).
//! * [`classifier`] is the terminal linear hinge-loss classifier.
//! * [`evalstat`] computes confusion matrices, kappa, run aggregates and Welch's t-test.
//! * [`synthgen`] generates speckled synthetic scenes with known change masks.

pub mod classifier;
pub mod error;
pub mod evalstat;
pub mod pcanet;
pub mod raster;
pub mod sampling;
pub mod seed;
pub mod synthgen;

pub use error::{Error, Result};
pub use raster::{Coord, Raster, ReferenceMap, TemporalPair};
