//! Voxel scene representation, procedural scene generation and coverage.

mod coverage;
mod generate;
mod grid;
pub mod io;

pub use coverage::{coverage, coverage_gain};
pub use generate::{
    camera_base, generate_scene, ground_truth_grid, DomainRandomizationConfig, GroundTruth, GroundTruthObject, Range,
    SceneSpec, Shape,
};
pub use grid::{BeliefGrid, CellState, Face, GridDims};
