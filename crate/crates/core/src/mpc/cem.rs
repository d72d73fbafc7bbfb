use serde::{Deserialize, Serialize};

use super::sample::{fit_distribution, sample_feasible, Gaussian7, Proposal};
use crate::error::{Error, Result};
use crate::motion::CollisionModel;
use crate::rng;
use crate::score::Scorer;
use crate::sensor::Viewpoint;

/// Cross-entropy planner settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcParams {
    pub n_iter: usize,
    /// Candidates drawn per iteration.
    pub n_mpc: usize,
    /// Elites kept after each iteration.
    pub elite_schedule: Vec<usize>,
    pub sigma0: [f64; 7],
    pub stage1_samples: usize,
}

impl Default for MpcParams {
    fn default() -> Self {
        MpcParams {
            n_iter: 5,
            n_mpc: 1000,
            elite_schedule: vec![800, 500, 200, 100, 50],
            sigma0: [0.1; 7],
            stage1_samples: 1000,
        }
    }
}

impl MpcParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.n_mpc == 0 || self.stage1_samples == 0 {
            return Err(Error::InvalidConfig("iteration and sample counts must be at least 1".into()));
        }
        if self.elite_schedule.len() != self.n_iter {
            return Err(Error::InvalidConfig(format!(
                "elite schedule has {} entries for {} iterations",
                self.elite_schedule.len(),
                self.n_iter
            )));
        }
        if self.elite_schedule.iter().any(|&k| k == 0 || k > self.n_mpc) {
            return Err(Error::InvalidConfig("elite counts must lie in [1, n_mpc]".into()));
        }
        if self.sigma0.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidConfig("initial sigma must be positive".into()));
        }
        Ok(())
    }

    /// The same schedule with every count divided by `factor` (at least 1,
    /// elites at least 2 where the original allowed it).
    pub fn scaled(&self, factor: usize) -> MpcParams {
        let f = factor.max(1);
        MpcParams {
            n_iter: self.n_iter,
            n_mpc: (self.n_mpc / f).max(2),
            elite_schedule: self.elite_schedule.iter().map(|k| (k / f).max(2.min(*k))).collect(),
            sigma0: self.sigma0,
            stage1_samples: (self.stage1_samples / f).max(1),
        }
    }
}

/// A candidate and its predicted coverage; `None` for unscored baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredViewpoint {
    pub viewpoint: Viewpoint,
    pub score: Option<f64>,
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub mean: [f64; 7],
    pub sigma: [f64; 7],
    pub accepted: usize,
    pub attempts: usize,
    pub elite_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcResult {
    /// Final elites, best first.
    pub elites: Vec<ScoredViewpoint>,
    pub stage1: ScoredViewpoint,
    pub trace: Vec<IterationTrace>,
}

impl MpcResult {
    /// Best elite score after each iteration that produced samples.
    pub fn best_scores(&self) -> Vec<f64> {
        self.trace.iter().filter_map(|t| t.elite_scores.first().copied()).collect()
    }
}

/// Indices of `scores` sorted descending; equal scores keep input order.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

fn scored(vs: &[Viewpoint], scores: &[f64], order: &[usize]) -> Vec<ScoredViewpoint> {
    order
        .iter()
        .map(|&i| ScoredViewpoint {
            viewpoint: vs[i],
            score: Some(scores[i]),
        })
        .collect()
}

/// Scores `n` uniform feasible samples and returns the best (first on ties).
pub fn stage1_seed(m: &CollisionModel, scorer: &Scorer, n: usize, seed: u64) -> Result<ScoredViewpoint> {
    let s = sample_feasible(m, &Proposal::Uniform, n, &mut rng::stream(seed, 0x57A1))?;
    let scores = scorer.predict_batch(&s.viewpoints)?;
    let best = rank_descending(&scores)[0];
    Ok(ScoredViewpoint {
        viewpoint: s.viewpoints[best],
        score: Some(scores[best]),
    })
}

/// Stage-one seeding followed by `n_iter` cross-entropy rounds. Each round
/// ranks its samples together with the previous elites, so the best score
/// never decreases. Rounds without a feasible sample keep the previous
/// distribution and elites.
pub fn bilevel_mpc(m: &CollisionModel, scorer: &Scorer, params: &MpcParams, seed: u64) -> Result<MpcResult> {
    params.validate()?;
    let stage1 = stage1_seed(m, scorer, params.stage1_samples, seed)?;
    let mut dist = Gaussian7 {
        mean: stage1.viewpoint.to_vec7(),
        sigma: params.sigma0,
    };
    let mut elites = vec![stage1];
    let mut trace = Vec::with_capacity(params.n_iter);
    for it in 0..params.n_iter {
        let mut r = rng::stream(seed, 0x100 + it as u64);
        let drawn = match sample_feasible(m, &Proposal::Gaussian(dist), params.n_mpc, &mut r) {
            Ok(s) => s,
            Err(Error::NoFeasibleSamples { attempts }) => {
                trace.push(IterationTrace {
                    iteration: it,
                    mean: dist.mean,
                    sigma: dist.sigma,
                    accepted: 0,
                    attempts,
                    elite_scores: Vec::new(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        // The previous elites compete with the new batch, listed first so
        // they win ties. Without this the best score drifts on plateaus.
        let mut pool: Vec<Viewpoint> = elites.iter().map(|e| e.viewpoint).collect();
        let mut scores: Vec<f64> = elites.iter().map(|e| e.score.unwrap_or(0.0)).collect();
        pool.extend_from_slice(&drawn.viewpoints);
        scores.extend(scorer.predict_batch(&drawn.viewpoints)?);
        let order = rank_descending(&scores);
        let k = params.elite_schedule[it].min(order.len());
        elites = scored(&pool, &scores, &order[..k]);
        trace.push(IterationTrace {
            iteration: it,
            mean: dist.mean,
            sigma: dist.sigma,
            accepted: drawn.viewpoints.len(),
            attempts: drawn.attempts,
            elite_scores: elites.iter().map(|e| e.score.unwrap_or(0.0)).collect(),
        });
        if k >= 2 {
            let vs: Vec<Viewpoint> = elites.iter().map(|e| e.viewpoint).collect();
            dist = fit_distribution(&vs)?;
        }
    }
    Ok(MpcResult { elites, stage1, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BaselineKind {
    Random,
    RandomGuided,
}

/// `n` uniform feasible candidates: unscored for `Random`, sorted by score
/// for `RandomGuided`.
pub fn baseline_policy(kind: BaselineKind, m: &CollisionModel, scorer: &Scorer, n: usize, seed: u64) -> Result<Vec<ScoredViewpoint>> {
    let s = sample_feasible(m, &Proposal::Uniform, n, &mut rng::stream(seed, 0xBA5E))?;
    match kind {
        BaselineKind::Random => Ok(s
            .viewpoints
            .into_iter()
            .map(|viewpoint| ScoredViewpoint { viewpoint, score: None })
            .collect()),
        BaselineKind::RandomGuided => {
            let scores = scorer.predict_batch(&s.viewpoints)?;
            Ok(scored(&s.viewpoints, &scores, &rank_descending(&scores)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::motion::{build_collision_model, MotionConfig, Workspace};
    use crate::registration::Belief;
    use crate::scene::{CellState, Face, GridDims};
    use crate::score::{HeuristicGain, ScoreModel};
    use crate::sensor::{CameraIntrinsics, SensorConfig};

    fn setup() -> (Belief, Workspace) {
        let dims = GridDims::new(8, 8, 8, 0.05, Point3::origin()).unwrap();
        let mut b = Belief::new(dims, 0.05);
        // Carve the front half so interior samples are possible.
        for k in 0..8 {
            for j in 0..8 {
                for i in 0..4 {
                    b.grid.set(dims.index(i, j, k), CellState::Free, None);
                }
            }
        }
        let ws = Workspace {
            dims,
            opening: Face::NegX,
            base: Point3::new(-0.3, 0.2, 0.2),
        };
        (b, ws)
    }

    fn small() -> MpcParams {
        MpcParams {
            n_iter: 3,
            n_mpc: 40,
            elite_schedule: vec![20, 10, 5],
            sigma0: [0.1; 7],
            stage1_samples: 30,
        }
    }

    #[test]
    fn stage1_picks_the_batch_maximum() {
        let (b, ws) = setup();
        let m = build_collision_model(&b.grid, &b.store, &ws, &MotionConfig::default());
        let intr = CameraIntrinsics::default();
        let model = ScoreModel::Heuristic;
        let scorer = Scorer::new(&model, &b, ws.opening, &intr, SensorConfig::default(), None, 0).unwrap();
        let best = stage1_seed(&m, &scorer, 25, 9).unwrap();
        let batch = sample_feasible(&m, &Proposal::Uniform, 25, &mut rng::stream(9, 0x57A1)).unwrap();
        let h = HeuristicGain::new(&b.grid, ws.opening, &intr);
        let max = batch.viewpoints.iter().map(|v| h.score(v)).fold(f64::MIN, f64::max);
        assert_eq!(best.score, Some(max));
        assert_eq!(h.score(&best.viewpoint), max);

        let one = stage1_seed(&m, &scorer, 1, 3).unwrap();
        let single = sample_feasible(&m, &Proposal::Uniform, 1, &mut rng::stream(3, 0x57A1)).unwrap();
        assert_eq!(one.viewpoint, single.viewpoints[0]);
    }

    #[test]
    fn constant_scores_keep_generation_order() {
        let (b, ws) = setup();
        let m = build_collision_model(&b.grid, &b.store, &ws, &MotionConfig::default());
        let scorer = Scorer::constant(&b, 0.5);
        let s1 = stage1_seed(&m, &scorer, 10, 2).unwrap();
        let first = sample_feasible(&m, &Proposal::Uniform, 10, &mut rng::stream(2, 0x57A1)).unwrap();
        assert_eq!(s1.viewpoint, first.viewpoints[0]);

        let out = bilevel_mpc(&m, &scorer, &small(), 4).unwrap();
        assert_eq!(out.elites.len(), 5);
        assert!(out.elites.iter().all(|e| e.score == Some(0.5)));

        let r = baseline_policy(BaselineKind::Random, &m, &scorer, 12, 8).unwrap();
        let g = baseline_policy(BaselineKind::RandomGuided, &m, &scorer, 12, 8).unwrap();
        let rv: Vec<_> = r.iter().map(|s| s.viewpoint).collect();
        let gv: Vec<_> = g.iter().map(|s| s.viewpoint).collect();
        assert_eq!(rv, gv);
    }

    #[test]
    fn random_never_scores_and_mpc_output_is_sorted_and_feasible() {
        let (b, ws) = setup();
        let m = build_collision_model(&b.grid, &b.store, &ws, &MotionConfig::default());
        let intr = CameraIntrinsics::default();
        let model = ScoreModel::Heuristic;
        let scorer = Scorer::new(&model, &b, ws.opening, &intr, SensorConfig::default(), None, 0).unwrap();
        let r = baseline_policy(BaselineKind::Random, &m, &scorer, 20, 1).unwrap();
        assert_eq!(scorer.calls(), 0);
        assert!(r.iter().all(|s| s.score.is_none() && m.is_free(&s.viewpoint)));

        let out = bilevel_mpc(&m, &scorer, &small(), 5).unwrap();
        let again = bilevel_mpc(&m, &scorer, &small(), 5).unwrap();
        assert_eq!(out, again);
        assert!(out.elites.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(out.elites.iter().all(|e| m.is_free(&e.viewpoint)));
        assert_eq!(out.trace.len(), 3);
        for t in &out.trace {
            assert!(t.sigma.iter().all(|s| *s >= crate::mpc::SIGMA_FLOOR));
        }
    }

    #[test]
    fn guided_top_matches_stage1_on_shared_samples() {
        let (b, ws) = setup();
        let m = build_collision_model(&b.grid, &b.store, &ws, &MotionConfig::default());
        let intr = CameraIntrinsics::default();
        let model = ScoreModel::Heuristic;
        let scorer = Scorer::new(&model, &b, ws.opening, &intr, SensorConfig::default(), None, 0).unwrap();
        let g = baseline_policy(BaselineKind::RandomGuided, &m, &scorer, 30, 6).unwrap();
        let batch = sample_feasible(&m, &Proposal::Uniform, 30, &mut rng::stream(6, 0xBA5E)).unwrap();
        let scores = scorer.predict_batch(&batch.viewpoints).unwrap();
        let best = rank_descending(&scores)[0];
        assert_eq!(g[0].viewpoint, batch.viewpoints[best]);
    }

    #[test]
    fn params_validation() {
        assert!(MpcParams::default().validate().is_ok());
        let mut p = MpcParams::default();
        p.elite_schedule.pop();
        assert!(p.validate().is_err());
        let mut p = MpcParams::default();
        p.elite_schedule[0] = 2000;
        assert!(p.validate().is_err());
        assert_eq!(*MpcParams::default().elite_schedule.last().unwrap(), 50);
    }
}
