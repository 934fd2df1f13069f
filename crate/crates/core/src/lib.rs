//! Extraction of tubular tree structures from 3-D scalar volumes.
//!
//! The pipeline converts a volume into a sparse set of multi-scale blob
//! measurements, tracks individual branches with a forward Kalman filter and
//! backward (fixed-interval) smoother from automatically selected seeds, and
//! validates branches by their length-averaged posterior covariance trace.
//! Synthetic tube-tree phantoms with exact centerline ground truth provide the
//! evaluation harness.
//!
//! Module map:
//!
//! - [`volume`] — dense volumes, MetaImage I/O, Gaussian smoothing, Hessians
//! - [`blobs`] — scale-normalized blob detection producing 4-D measurements
//! - [`statespace`] — linear process/measurement models and Gaussian states
//! - [`smoother`] — forward filtering with gating, backward smoothing
//! - [`tracker`] — seed selection, bidirectional branch tracking, validation
//! - [`phantom`] — synthetic tube trees, rasterization, corruption models
//! - [`evaluation`] — centerline distance metrics and a region-growing baseline

pub mod blobs;
pub mod error;
pub mod evaluation;
pub mod phantom;
pub mod smoother;
pub mod statespace;
pub mod tracker;
pub mod volume;

pub use error::{Error, Result};
