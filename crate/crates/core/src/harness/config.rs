use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MotionConfig;
use crate::mpc::MpcParams;
use crate::registration::RegistrationConfig;
use crate::score::ScoreKind;
use crate::sensor::{CameraIntrinsics, SensorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Policy {
    Random,
    RandomGuided,
    BilevelMpc,
    Vpformer,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Random, Policy::RandomGuided, Policy::BilevelMpc, Policy::Vpformer];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Random => "RANDOM",
            Policy::RandomGuided => "RANDOM_GUIDED",
            Policy::BilevelMpc => "BILEVEL_MPC",
            Policy::Vpformer => "VPFORMER",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "RANDOM" => Ok(Policy::Random),
            "RANDOM_GUIDED" => Ok(Policy::RandomGuided),
            "BILEVEL_MPC" | "MPC" => Ok(Policy::BilevelMpc),
            "VPFORMER" => Ok(Policy::Vpformer),
            _ => Err(Error::InvalidConfig(format!("unknown policy {s:?}"))),
        }
    }
}

/// Everything that parameterizes one active-sensing episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub policy: Policy,
    pub score: ScoreKind,
    /// The episode succeeds once coverage exceeds this value.
    pub c_max: f64,
    /// Cap on loop iterations, executed and discarded steps together.
    pub t_max: usize,
    pub completion: bool,
    /// Sample around sequence-model predictions and keep the best scored.
    pub refinement: bool,
    /// Candidates walked when looking for a plannable viewpoint.
    pub batch: usize,
    /// Uniform candidates scored by the guided baseline.
    pub guided_samples: usize,
    /// Steps proposed by the sequence model before reverting to stage-one
    /// sampling.
    pub vpformer_steps: usize,
    pub refine_samples: usize,
    pub refine_sigma: f64,
    pub eta: f64,
    pub miss_prob: f64,
    pub volume_cap: f64,
    pub mpc: MpcParams,
    pub motion: MotionConfig,
    pub sensor: SensorConfig,
    pub intrinsics: CameraIntrinsics,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        let reg = RegistrationConfig::default();
        EpisodeConfig {
            policy: Policy::BilevelMpc,
            score: ScoreKind::RolloutLabeler,
            c_max: 0.85,
            t_max: 15,
            completion: true,
            refinement: true,
            batch: 50,
            guided_samples: 1000,
            vpformer_steps: 2,
            refine_samples: 100,
            refine_sigma: 0.1,
            eta: reg.eta,
            miss_prob: reg.miss_prob,
            volume_cap: reg.volume_cap,
            mpc: MpcParams::default(),
            motion: MotionConfig::default(),
            sensor: SensorConfig::default(),
            intrinsics: CameraIntrinsics::default(),
            seed: 0,
        }
    }
}

impl EpisodeConfig {
    pub fn registration(&self) -> RegistrationConfig {
        RegistrationConfig {
            eta: self.eta,
            miss_prob: self.miss_prob,
            completion: self.completion,
            volume_cap: self.volume_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.c_max) {
            return Err(Error::InvalidConfig("c_max must lie in [0, 1]".into()));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidConfig("t_max must be at least 1".into()));
        }
        if self.batch == 0 || self.guided_samples == 0 || self.refine_samples == 0 {
            return Err(Error::InvalidConfig("batch and sample counts must be at least 1".into()));
        }
        if !(self.refine_sigma >= 0.0) {
            return Err(Error::InvalidConfig("refine sigma must be non-negative".into()));
        }
        self.registration().validate()?;
        self.mpc.validate()?;
        self.motion.validate()?;
        self.intrinsics.validate()
    }
}
