//! Normals, FPFH descriptors and keypoints.

pub mod fpfh;
pub mod keypoints;
pub mod normals;

pub use fpfh::{
    compute_fpfh, compute_fpfh_with, compute_spfh, normals_and_fpfh, pair_features, DescriptorSet, FpfhDescriptor,
    FpfhOptions, PairFeatures, BINS_PER_FEATURE, DESCRIPTOR_DIM,
};
pub use keypoints::{detect_keypoints, median_spacing, KeypointParams, KeypointSet};
pub use normals::{estimate_normals, NormalSet};
