use std::path::PathBuf;

use clap::Args;
use nbv::harness::{EpisodeConfig, Policy};
use nbv::score::ScoreKind;

/// Flags mirroring every `EpisodeConfig` field. Unset flags keep the value
/// from `--config` (or the built-in default).
#[derive(Debug, Clone, Default, Args)]
pub struct EpisodeArgs {
    /// JSON file with an EpisodeConfig document; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub policy: Option<Policy>,
    /// rollout, heuristic or surrogate.
    #[arg(long)]
    pub score: Option<ScoreKind>,
    #[arg(long)]
    pub c_max: Option<f64>,
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long, action = clap::ArgAction::Set)]
    pub completion: Option<bool>,
    #[arg(long, action = clap::ArgAction::Set)]
    pub refinement: Option<bool>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub guided_samples: Option<usize>,
    #[arg(long)]
    pub vpformer_steps: Option<usize>,
    #[arg(long)]
    pub refine_samples: Option<usize>,
    #[arg(long)]
    pub refine_sigma: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub miss_prob: Option<f64>,
    #[arg(long)]
    pub volume_cap: Option<f64>,
    #[arg(long)]
    pub mpc_iterations: Option<usize>,
    #[arg(long)]
    pub mpc_samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub elite_schedule: Option<Vec<usize>>,
    /// One value for all seven components, or seven values.
    #[arg(long, value_delimiter = ',')]
    pub sigma0: Option<Vec<f64>>,
    #[arg(long)]
    pub stage1_samples: Option<usize>,
    #[arg(long)]
    pub body_radius: Option<f64>,
    #[arg(long)]
    pub staging_depth: Option<f64>,
    #[arg(long)]
    pub reach_radius: Option<f64>,
    #[arg(long)]
    pub rrt_budget: Option<usize>,
    #[arg(long)]
    pub rrt_step: Option<f64>,
    #[arg(long)]
    pub goal_bias: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma_pos: Option<f64>,
    #[arg(long)]
    pub sigma_ang: Option<f64>,
    #[arg(long)]
    pub eps_pos: Option<f64>,
    #[arg(long)]
    pub eps_ang_deg: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub optical_offset: Option<Vec<f64>>,
    #[arg(long)]
    pub depth_sigma: Option<f64>,
    #[arg(long)]
    pub edge_dropout: Option<f64>,
    #[arg(long)]
    pub hfov_deg: Option<f64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub max_range: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

macro_rules! set {
    ($($dst:expr => $src:expr),* $(,)?) => {
        $(if let Some(v) = $src.clone() { $dst = v; })*
    };
}

impl EpisodeArgs {
    /// Applies the set flags on top of `cfg`.
    pub fn apply(&self, cfg: &mut EpisodeConfig) -> Result<(), String> {
        set! {
            cfg.policy => self.policy,
            cfg.score => self.score,
            cfg.c_max => self.c_max,
            cfg.t_max => self.t_max,
            cfg.completion => self.completion,
            cfg.refinement => self.refinement,
            cfg.batch => self.batch,
            cfg.guided_samples => self.guided_samples,
            cfg.vpformer_steps => self.vpformer_steps,
            cfg.refine_samples => self.refine_samples,
            cfg.refine_sigma => self.refine_sigma,
            cfg.eta => self.eta,
            cfg.miss_prob => self.miss_prob,
            cfg.volume_cap => self.volume_cap,
            cfg.mpc.n_iter => self.mpc_iterations,
            cfg.mpc.n_mpc => self.mpc_samples,
            cfg.mpc.elite_schedule => self.elite_schedule,
            cfg.mpc.stage1_samples => self.stage1_samples,
            cfg.motion.body_radius => self.body_radius,
            cfg.motion.staging_depth => self.staging_depth,
            cfg.motion.reach_radius => self.reach_radius,
            cfg.motion.rrt_budget => self.rrt_budget,
            cfg.motion.rrt_step => self.rrt_step,
            cfg.motion.goal_bias => self.goal_bias,
            cfg.motion.lambda => self.lambda,
            cfg.motion.sigma_pos => self.sigma_pos,
            cfg.motion.sigma_ang => self.sigma_ang,
            cfg.motion.eps_pos => self.eps_pos,
            cfg.motion.eps_ang_deg => self.eps_ang_deg,
            cfg.sensor.depth_sigma => self.depth_sigma,
            cfg.sensor.edge_dropout => self.edge_dropout,
            cfg.intrinsics.hfov_deg => self.hfov_deg,
            cfg.intrinsics.width => self.width,
            cfg.intrinsics.height => self.height,
            cfg.intrinsics.max_range => self.max_range,
            cfg.seed => self.seed,
        }
        if let Some(s) = &self.sigma0 {
            cfg.mpc.sigma0 = match s.len() {
                1 => [s[0]; 7],
                7 => std::array::from_fn(|i| s[i]),
                n => return Err(format!("--sigma0 takes 1 or 7 values, got {n}")),
            };
        }
        if let Some(o) = &self.optical_offset {
            if o.len() != 3 {
                return Err(format!("--optical-offset takes 3 values, got {}", o.len()));
            }
            cfg.sensor.optical_offset = [o[0], o[1], o[2]];
        }
        Ok(())
    }
}
