//! Surfel map: the surfel model, plane-induced inverse depth, depth-buffered
//! rasterization, neighbour-based initialization and reference frame
//! hand-over.

mod handover;
mod init;
mod io;
mod keyframe;
mod raster;
mod types;

pub use handover::{change_reference_frame, prune_surfels, HandoverStats};
pub use init::{initialize_surfels, InitParams};
pub use io::{read_surfel_map, write_surfel_map, SurfelMapHeader};
pub use keyframe::{Keyframe, KeyframeError};
pub use raster::{footprints, rasterize, rasterize_surfels, RasterBuffers, DEPTH_TIE_EPS, EMPTY};
pub use types::{plane_inverse_depth, Surfel, SurfelError, INV_DEPTH_MAX, INV_DEPTH_MIN};
