//! Point-cloud geometry upsampling.
//!
//! A cloud is normalized to the unit cube and diced into blocks. In each
//! block the coordinate with the smallest variance is modelled as a sparse
//! sum of cosines over the other two, new positions are taken at Delaunay
//! edge midpoints in that parameter plane, and their heights are read off
//! the model. [`metrics`] provides point-to-point and point-to-plane errors
//! for evaluation.

// negated comparisons double as NaN rejection
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cloud_io;
pub mod error;
pub mod metrics;
pub mod partition;
pub mod resample;
pub mod spectral_model;

pub use cloud_io::{normalize_unit_cube, read_ply, write_ply, PointCloud};
pub use error::{Error, Result};
pub use resample::{upsample_cloud, UpsampleConfig};
