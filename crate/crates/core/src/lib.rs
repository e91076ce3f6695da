//! Tree-Wasserstein distances whose edge weights are fitted so that tree
//! shortest-path distances regress onto a ground metric.
//!
//! The pipeline:
//!
//! 1. embed a [`PointCloud`] into a tree ([`build::build_quadtree`],
//!    [`build::build_clustertree`]);
//! 2. sample point pairs and their ground distances ([`features::sample_pairs`]);
//! 3. fit non-negative edge weights with an L1 penalty ([`fit::fit_weights`]),
//!    optionally over several independently built trees ([`fit::fit_sliced`]);
//! 4. evaluate distances between measures in time linear in the support path
//!    lengths ([`Tree::twd`], [`fit::SlicedFit::twd`]).
//!
//! [`ot`] holds an exact transportation solver used as the reference.

pub mod build;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod fit;
pub mod ot;
pub mod synth;
pub mod tree;

#[cfg(test)]
mod testutil;

pub use data::{GroundMetric, Measure, PointCloud};
pub use error::{Error, Result};
pub use tree::{SubtreeMassAccumulator, Tree};
