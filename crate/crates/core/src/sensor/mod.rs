//! Simulated pinhole depth camera.

mod camera;
mod carve;
pub mod pgm;
mod render;
mod traverse;

pub use camera::{CameraIntrinsics, SensorConfig, Viewpoint};
pub use carve::{carve_into, carve_visibility};
pub use render::{apply_noise, render_depth, render_truth, Observation};
pub use traverse::{cast, cast_skipping, chebyshev_field, RayEnd};
