//! Viewpoint generation: bilevel cross-entropy planning and the random
//! baselines.

mod cem;
mod sample;

pub use cem::{
    baseline_policy, bilevel_mpc, rank_descending, stage1_seed, BaselineKind, IterationTrace, MpcParams, MpcResult,
    ScoredViewpoint,
};
pub use sample::{attempt_budget, fit_distribution, sample_feasible, uniform_orientation, Gaussian7, Proposal, Samples, SIGMA_FLOOR};
