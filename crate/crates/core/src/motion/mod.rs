//! Free-flying camera body: collision model, feasibility and path planning.

mod collision;
mod path;

pub use collision::{boundary_slabs, build_collision_model, staging_region, CollisionModel, MotionConfig, Workspace};
pub use path::{
    execute_with_noise, path_distances, plan_path, validate_path, validation_step, within_tolerance, Path, PathViolation,
};
