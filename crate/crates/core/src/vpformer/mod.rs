//! Causal attention model over (coverage, belief, viewpoint) tokens that
//! proposes the next viewpoint, trained by imitating planner episodes.

mod attention;
mod expert;
mod model;
mod refine;
mod train;

pub use attention::{attention_weights, causal_mask, masked_attention};
pub use expert::collect_expert_data;
pub use model::{Token, TokenSequence, Trace, VpConfig, VpFormer};
pub use refine::refine_viewpoint;
pub use train::{bc_loss_and_grad, bc_mse, train_bc, BcHyper, BcReport, Example, ExpertDataset, Trajectory};
