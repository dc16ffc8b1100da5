//! Post-processing and evaluation toolkit for panoptic segmentation.
//!
//! The crate covers everything around the network: unifying class
//! taxonomies across datasets, adaptive fusion of semantic and instance
//! logits into panoptic maps, PQ/SQ/RQ benchmarking with mergeable
//! accumulators, balanced epoch planning with the milestone LR schedule,
//! test-time-augmentation merging, and bit-exact raster/tensor file I/O.

pub mod cli;
pub mod data_plan;
pub mod fusion;
pub mod label_space;
pub mod metrics;
pub mod raster;
pub mod tensor;
pub mod tta;

mod fs_util;
mod interp;

pub use fusion::{fuse_logits, panoptic_fuse};
pub use label_space::{build_joint_space, JointLabelSpace};
pub use metrics::{finalize, match_segments, merge_stats, PqStats};
pub use raster::PanopticMap;
pub use tensor::SemanticLogits;
