//! Viewpoint scoring: exact rollout labels, a ray-casting information-gain
//! heuristic and a small learned surrogate.

mod data;
mod features;
mod heuristic;
mod model;
mod rollout;
mod surrogate;

pub use data::{generate_training_data, read_pairs_jsonl, training_scene_seed, write_pairs_jsonl, DataGenConfig, Split, TrainingPair};
pub use features::{view_features, FeatureSpec, VIEW_FEATURES};
pub use heuristic::{heuristic_gain, HeuristicGain};
pub use model::{ScoreKind, ScoreModel, Scorer};
pub use rollout::{label_rollout, RolloutOracle};
pub use surrogate::{train_surrogate, Surrogate, SurrogateHyper, TrainReport};
