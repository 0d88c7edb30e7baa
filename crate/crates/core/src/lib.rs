//! Principal sub-manifolds on unit spheres and flat charts.
//!
//! The pipeline: points on `S^d` (generated, or Kendall preshapes of planar
//! landmarks) are summarized by local tangent PCA, and a k-dimensional
//! sub-manifold is grown from a start point by [`fitting::fit_submanifold`].
//! [`viz`] extracts principal directions, shape grids and 3-D projections.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod dataset;
pub mod error;
pub mod fitting;
pub mod geometry;
pub mod shape;
pub mod stats;
pub mod viz;

pub use error::{Error, Result};
pub use fitting::{FitConfig, Net, StopReason, Submanifold};
pub use geometry::{Chart, Point, Tangent};
pub use shape::{LandmarkConfig, Preshape};
pub use stats::{EigenFrame, KernelKind, KernelSpec};
