//! Dense monocular depth from directly optimized surfels.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod geometry;
pub mod optimizer;
pub mod pipeline;
pub mod surfel;
pub mod synthetic;
