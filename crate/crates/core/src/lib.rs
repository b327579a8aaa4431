//! Shape from shading with a hybrid diffuse/specular mirror-symmetric network.
//!
//! The pipeline is: render or load intensity images, train a [`HybridModel`]
//! on them, turn the learned normals into gradients, integrate those into a
//! depth map, and score everything against ground truth.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod integrate;
pub mod io;
pub mod metrics;
pub mod model;
pub mod scene;
pub mod train;

pub use error::{Error, Result};
pub use integrate::{
    integrability_residual, integrate, integrate_line, integrate_spectral, normals_to_gradients,
    DepthMap, GradientField, Mask, Method,
};

pub use metrics::{angular_error, convergence_compare, depth_rmse, AngularError, EvalReport};
pub use model::{
    direction, AlbedoMap, CombinationWeights, Direction, HybridModel, IntensityImage,
    MirrorWeights, NormalField, OutputLayer, Reflectance, SubnetworkParams, Vec3,
};
pub use scene::{make_height_field, render, AlbedoSpec, GroundTruth, RenderSpec, SceneSpec, Shape};
pub use train::{
    train, train_epoch, InitMode, OptimizerMode, TrainConfig, TrainRecord, TrainedModel, Trainer,
    UpdateMode,
};
