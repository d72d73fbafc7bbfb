//! Instance segmentation, merging, shape completion and evaluation.

mod complete;
mod integrate;
mod segment;
mod store;

pub use complete::{chamfer, complete_instance, denormalize, normalize_partial, voxel_bounds, NormalizedCloud};
pub use integrate::{integrate_observation, Belief, RegistrationConfig};
pub use segment::{segment_oracle, PartialCloud};
pub use store::{merge_instances, Instance, InstanceStore, InstanceSummary, MergeMethod};
