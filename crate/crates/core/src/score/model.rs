use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::features::view_features;
use super::heuristic::HeuristicGain;
use super::rollout::RolloutOracle;
use super::surrogate::Surrogate;
use crate::error::{Error, Result};
use crate::registration::Belief;
use crate::scene::Face;
use crate::sensor::{CameraIntrinsics, SensorConfig, Viewpoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScoreKind {
    RolloutLabeler,
    Heuristic,
    Surrogate,
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rollout" | "rollout_labeler" => Ok(ScoreKind::RolloutLabeler),
            "heuristic" => Ok(ScoreKind::Heuristic),
            "surrogate" => Ok(ScoreKind::Surrogate),
            _ => Err(Error::InvalidConfig(format!("unknown score model {s:?}"))),
        }
    }
}

/// A viewpoint scoring function ĉ = f(belief, v).
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreModel {
    RolloutLabeler,
    Heuristic,
    Surrogate(Box<Surrogate>),
}

impl ScoreModel {
    pub fn kind(&self) -> ScoreKind {
        match self {
            ScoreModel::RolloutLabeler => ScoreKind::RolloutLabeler,
            ScoreModel::Heuristic => ScoreKind::Heuristic,
            ScoreModel::Surrogate(_) => ScoreKind::Surrogate,
        }
    }
}

enum Prepared<'a> {
    Rollout(&'a RolloutOracle),
    Heuristic(HeuristicGain<'a>),
    Surrogate(&'a Surrogate, Vec<f64>),
    Constant(f64),
}

/// A score model bound to one belief state. Per-belief work (the grid
/// embedding, the heuristic's skip field) is done once at construction.
pub struct Scorer<'a> {
    prepared: Prepared<'a>,
    belief: &'a Belief,
    sensor: SensorConfig,
    seed: u64,
    calls: Cell<usize>,
}

impl<'a> Scorer<'a> {
    /// Binds `model` to `belief`. Rollout labels need `oracle`.
    pub fn new(
        model: &'a ScoreModel,
        belief: &'a Belief,
        opening: Face,
        intr: &CameraIntrinsics,
        sensor: SensorConfig,
        oracle: Option<&'a RolloutOracle>,
        seed: u64,
    ) -> Result<Self> {
        let prepared = match model {
            ScoreModel::RolloutLabeler => Prepared::Rollout(oracle.ok_or(Error::OracleUnavailable)?),
            ScoreModel::Heuristic => Prepared::Heuristic(HeuristicGain::new(&belief.grid, opening, intr)),
            ScoreModel::Surrogate(s) => {
                let feats = s.spec.featurize(&belief.grid);
                Prepared::Surrogate(s, s.grid_embedding(&feats))
            }
        };
        Ok(Scorer {
            prepared,
            belief,
            sensor,
            seed,
            calls: Cell::new(0),
        })
    }

    /// A scorer returning `value` everywhere; used to test tie handling.
    pub fn constant(belief: &'a Belief, value: f64) -> Self {
        Scorer {
            prepared: Prepared::Constant(value),
            belief,
            sensor: SensorConfig::default(),
            seed: 0,
            calls: Cell::new(0),
        }
    }

    /// Number of viewpoints scored so far.
    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    pub fn predict(&self, v: &Viewpoint) -> Result<f64> {
        self.calls.set(self.calls.get() + 1);
        Ok(match &self.prepared {
            Prepared::Rollout(o) => o.label(self.belief, v, self.seed)?,
            Prepared::Heuristic(h) => h.score(&self.sensor.optical_pose(v)),
            Prepared::Surrogate(s, emb) => s.predict_embedded(emb, &view_features(self.belief.grid.dims(), v)),
            Prepared::Constant(c) => *c,
        })
    }

    /// Scores in input order.
    pub fn predict_batch(&self, vs: &[Viewpoint]) -> Result<Vec<f64>> {
        vs.iter().map(|v| self.predict(v)).collect()
    }
}
