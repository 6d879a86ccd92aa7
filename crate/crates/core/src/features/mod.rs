//! Per-voxel feature bank: Gaussian scale space, Difference of Gaussians,
//! gradient magnitude and local window statistics.

mod filters;
mod spec;
mod stack;

pub use filters::{
    difference_of_gaussians, difference_of_gaussians_real, gaussian_blur, gaussian_blur_real,
    gaussian_kernel, gradient_magnitude, gradient_magnitude_real, local_stats,
};
pub use spec::{FeatureDescriptor, FeatureSpec};
pub use stack::{
    build_feature_stack, build_feature_stack_with, extract_labeled_rows, visit_feature_slabs,
    FeatureMatrix, FilterMode,
};
