//! Geometry kernels: exact kNN, farthest point sampling, patch handling,
//! and bilateral feature interpolation.

mod interp;
mod knn;
mod patch;
mod points;
mod sampling;

pub use interp::{
    bilateral_interpolate, bilateral_interpolate_var, bilateral_interpolate_var_with_widths,
    width_parameter,
};
pub use knn::{knn, mean_nn_distance, nearest, NeighborIndex, Rows};
pub use patch::{
    denormalize, extract_inference_patches, extract_training_patches, merge_and_resample,
    normalize_patch, reference_patch_size, InferencePatch, PatchPair, PatchTransform,
};
pub use points::PointSet;
pub use sampling::farthest_point_sample;

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
