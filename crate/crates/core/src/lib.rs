//! Active next-best-view planning for unknown, cluttered cabinet scenes.
//!
//! The crate simulates a free-flying depth camera exploring a box-shaped
//! cabinet with one open face. A three-state voxel belief is carved from
//! rendered depth images, object instances are registered and completed,
//! and several viewpoint policies (random baselines, a bilevel
//! cross-entropy planner and a masked-attention sequence model) choose
//! where to look next.
//!
//! Module map:
//!
//! - [`scene`]: voxel grids, scene generation and the coverage measure.
//! - [`sensor`]: pinhole depth rendering and visibility carving.
//! - [`registration`]: segmentation, instance merging, completion, Chamfer.
//! - [`score`]: rollout labels, the ray heuristic and the learned surrogate.
//! - [`mpc`]: bilevel cross-entropy viewpoint generation and baselines.
//! - [`vpformer`]: the causal attention viewpoint sequence model.
//! - [`motion`]: collision model, feasibility and path planning.
//! - [`harness`]: the episode loop, benchmark metrics and file exports.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod motion;
pub mod mpc;
pub mod nn;
pub mod registration;
pub mod rng;
pub mod scene;
pub mod score;
pub mod sensor;
pub mod vpformer;

pub use error::{Error, Result};
pub use geometry::{Aabb, Point3, Vector3};
pub use scene::{BeliefGrid, CellState, GridDims, SceneSpec};
pub use sensor::{CameraIntrinsics, Observation, Viewpoint};
