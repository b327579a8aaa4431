//! Shared inputs for the benchmarks.

use sfs_core::scene::{canonical_sphere, make_height_field, render, GroundTruth};
use sfs_core::{GradientField, IntensityImage, Mask};

pub fn sphere_dataset() -> (GroundTruth, Vec<IntensityImage>) {
    let (scene, spec) = canonical_sphere();
    let truth = make_height_field(&scene).expect("canonical scene");
    let images = render(&truth, &spec).expect("canonical render");
    (truth, images)
}

/// Exact gradients of `z = -c (x^2 + y^2)` on a full `n x n` grid.
pub fn paraboloid_gradients(n: usize) -> GradientField {
    let c = 0.02;
    let half = (n as f64 - 1.0) / 2.0;
    GradientField::from_fn(Mask::full(n, n), |x, y| {
        (-2.0 * c * (x as f64 - half), -2.0 * c * (y as f64 - half))
    })
    .expect("finite gradients")
}
