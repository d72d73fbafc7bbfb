use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{EpisodeConfig, Policy};
use crate::error::{Error, Result};
use crate::motion::{
    build_collision_model, execute_with_noise, path_distances, plan_path, within_tolerance, CollisionModel, Path, Workspace,
};
use crate::mpc::{baseline_policy, bilevel_mpc, sample_feasible, BaselineKind, Proposal, ScoredViewpoint};
use crate::registration::Belief;
use crate::rng;
use crate::scene::{BeliefGrid, SceneSpec};
use crate::score::{FeatureSpec, RolloutOracle, ScoreKind, ScoreModel, Scorer, Surrogate};
use crate::sensor::{apply_noise, render_truth, Observation, Viewpoint};
use crate::vpformer::{refine_viewpoint, Token, TokenSequence, VpFormer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Success,
    StepLimit,
    PlanningFailure,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Success => "SUCCESS",
            Status::StepLimit => "STEP_LIMIT",
            Status::PlanningFailure => "PLANNING_FAILURE",
        }
    }
}

/// One iteration of the episode loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Loop iteration, counting discarded steps.
    pub iteration: usize,
    /// Executed views before this one.
    pub t: usize,
    pub planned: Viewpoint,
    pub executed: Viewpoint,
    /// Predicted coverage of the planned view, when the policy scored it.
    pub predicted: Option<f64>,
    /// Coverage after this step (unchanged when discarded).
    pub coverage: f64,
    pub cspace: f64,
    pub workspace: f64,
    /// Candidates tried before one could be planned to.
    pub candidates_tried: usize,
    pub discarded: bool,
    /// Seed used to integrate the observation.
    pub observation_seed: u64,
    pub path: Vec<Viewpoint>,
}

/// Deterministic record of an episode. Wall-clock timings are kept apart
/// in [`EpisodeTiming`] so that logs are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub scene_seed: u64,
    pub policy: Policy,
    pub score: ScoreKind,
    pub completion: bool,
    pub refinement: bool,
    pub scene_volume: f64,
    pub start: Viewpoint,
    pub steps: Vec<StepRecord>,
    pub status: Status,
    /// Set when the episode stopped on an error rather than a planning dead end.
    pub error: Option<String>,
}

impl EpisodeLog {
    /// Number of views actually integrated.
    pub fn viewpoints(&self) -> usize {
        self.steps.iter().filter(|s| !s.discarded).count()
    }

    pub fn discarded(&self) -> usize {
        self.steps.iter().filter(|s| s.discarded).count()
    }

    pub fn final_coverage(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.coverage)
    }

    /// Coverage after each integrated view.
    pub fn coverage_curve(&self) -> Vec<f64> {
        self.steps.iter().filter(|s| !s.discarded).map(|s| s.coverage).collect()
    }

    pub fn cspace(&self) -> f64 {
        self.steps.iter().map(|s| s.cspace).sum()
    }

    pub fn workspace(&self) -> f64 {
        self.steps.iter().map(|s| s.workspace).sum()
    }

    pub fn success(&self) -> bool {
        self.status == Status::Success
    }

    /// Checks that coverage never decreases and the step cap holds.
    pub fn check_invariants(&self, t_max: usize) -> Result<()> {
        if self.steps.len() > t_max {
            return Err(Error::Format(format!("{} steps exceed the cap {t_max}", self.steps.len())));
        }
        let mut prev = 0.0;
        for (i, s) in self.steps.iter().enumerate() {
            if s.coverage < prev {
                return Err(Error::Format(format!("coverage drops at step {i}")));
            }
            prev = s.coverage;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTiming {
    /// Seconds spent on candidate generation, scoring and path planning,
    /// per loop iteration.
    pub planning_seconds: Vec<f64>,
}

impl EpisodeTiming {
    pub fn total(&self) -> f64 {
        self.planning_seconds.iter().sum()
    }
}

/// Belief and observation after an integrated step.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: usize,
    pub observation: Observation,
    pub grid: BeliefGrid,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub log: EpisodeLog,
    pub timing: EpisodeTiming,
    /// Tokens for sequence-model training: the start pose, then one per
    /// integrated view.
    pub tokens: TokenSequence,
    pub snapshots: Vec<Snapshot>,
}

/// Trained parameters an episode may need.
#[derive(Debug, Clone, Copy, Default)]
pub struct Models<'a> {
    pub surrogate: Option<&'a Surrogate>,
    pub vpformer: Option<&'a VpFormer>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub snapshots: bool,
}

/// Pose the camera starts from: the middle of the staging box, looking at
/// the grid center.
pub fn start_pose(m: &CollisionModel) -> Viewpoint {
    Viewpoint::look_at(m.staging.center(), m.dims.center())
}

fn score_model(cfg: &EpisodeConfig, models: &Models) -> Result<ScoreModel> {
    Ok(match cfg.score {
        ScoreKind::RolloutLabeler => ScoreModel::RolloutLabeler,
        ScoreKind::Heuristic => ScoreModel::Heuristic,
        ScoreKind::Surrogate => ScoreModel::Surrogate(Box::new(
            models
                .surrogate
                .cloned()
                .ok_or_else(|| Error::InvalidConfig("surrogate score needs trained parameters".into()))?,
        )),
    })
}

/// Runs the active-sensing loop on one scene.
pub fn run_episode(spec: &SceneSpec, cfg: &EpisodeConfig, models: &Models) -> Result<EpisodeLog> {
    Ok(run_episode_with(spec, cfg, models, RunOptions::default())?.log)
}

pub fn run_episode_with(spec: &SceneSpec, cfg: &EpisodeConfig, models: &Models, opts: RunOptions) -> Result<EpisodeOutcome> {
    cfg.validate()?;
    let model = score_model(cfg, models)?;
    let vpformer = match cfg.policy {
        Policy::Vpformer => Some(
            models
                .vpformer
                .ok_or_else(|| Error::InvalidConfig("sequence policy needs trained parameters".into()))?,
        ),
        _ => None,
    };
    let features = vpformer.map_or(FeatureSpec::default(), |v| v.cfg.features);
    let reg = cfg.registration();
    let ws = Workspace::of(spec);
    let oracle = RolloutOracle::new(spec, cfg.intrinsics, reg, cfg.sensor);
    let ep_seed = rng::derive(cfg.seed, spec.seed);
    let jump = 2.0 * spec.dims.resolution;

    let mut belief = Belief::new(spec.dims, reg.eta);
    let m0 = build_collision_model(&belief.grid, &belief.store, &ws, &cfg.motion);
    let mut current = start_pose(&m0);
    if !m0.is_free(&current) {
        let mut r = rng::stream(ep_seed, 0x57A7);
        current = sample_feasible(&m0, &Proposal::Uniform, 1, &mut r)?.viewpoints[0];
    }
    let mut tokens = TokenSequence {
        dims: spec.dims,
        bounds: m0.sampling_bounds(),
        tokens: vec![Token {
            coverage: 0.0,
            features: features.featurize(&belief.grid),
            viewpoint: current,
        }],
    };
    let mut log = EpisodeLog {
        scene_seed: spec.seed,
        policy: cfg.policy,
        score: cfg.score,
        completion: cfg.completion,
        refinement: cfg.refinement,
        scene_volume: spec.volume(),
        start: current,
        steps: Vec::new(),
        status: Status::StepLimit,
        error: None,
    };
    let mut timing = EpisodeTiming::default();
    let mut snapshots = Vec::new();
    let mut c = 0.0;
    let mut t = 0;
    let mut iteration = 0;

    while c <= cfg.c_max && iteration < cfg.t_max {
        let it_seed = rng::derive(ep_seed, iteration as u64);
        let clock = Instant::now();
        let m = build_collision_model(&belief.grid, &belief.store, &ws, &cfg.motion);
        let scorer = Scorer::new(&model, &belief, spec.opening, &cfg.intrinsics, cfg.sensor, Some(&oracle), it_seed)?;
        let candidates = match propose(cfg, &m, &scorer, vpformer, &tokens, t, it_seed) {
            Ok(c) => c,
            Err(e @ Error::NoFeasibleSamples { .. }) => {
                log.status = Status::PlanningFailure;
                log.error = Some(e.to_string());
                timing.planning_seconds.push(clock.elapsed().as_secs_f64());
                break;
            }
            Err(e) => return Err(e),
        };
        let mut chosen: Option<(usize, ScoredViewpoint, Path)> = None;
        for (j, cand) in candidates.iter().take(cfg.batch).enumerate() {
            if let Ok(path) = plan_path(&current, &cand.viewpoint, &m, &cfg.motion, rng::derive(it_seed, 0x9A7 + j as u64)) {
                chosen = Some((j + 1, *cand, path));
                break;
            }
        }
        timing.planning_seconds.push(clock.elapsed().as_secs_f64());
        let Some((tried, best, path)) = chosen else {
            log.status = Status::PlanningFailure;
            break;
        };
        let (cspace, work) = path_distances(&path, cfg.motion.lambda);
        let real = execute_with_noise(&path, &cfg.motion, rng::derive(it_seed, 0xE8EC));
        let obs_seed = rng::derive(it_seed, 0x0B5);
        let mut rec = StepRecord {
            iteration,
            t,
            planned: best.viewpoint,
            executed: real,
            predicted: best.score,
            coverage: c,
            cspace,
            workspace: work,
            candidates_tried: tried,
            discarded: false,
            observation_seed: obs_seed,
            path: path.waypoints.clone(),
        };
        iteration += 1;
        // The body ends where execution left it; plan the next move from
        // there when it is a valid start, otherwise from the planned pose.
        current = if m.is_free(&real) { real } else { best.viewpoint };
        if !within_tolerance(&real, &best.viewpoint, &cfg.motion) {
            rec.discarded = true;
            log.steps.push(rec);
            continue;
        }
        let obs = observe(&oracle, cfg, &real, jump, obs_seed)?;
        belief.integrate(&obs, &cfg.intrinsics, &reg, obs_seed)?;
        c = belief.coverage();
        t += 1;
        rec.coverage = c;
        log.steps.push(rec);
        tokens.tokens.push(Token {
            coverage: c,
            features: features.featurize(&belief.grid),
            viewpoint: real,
        });
        if opts.snapshots {
            snapshots.push(Snapshot {
                t,
                observation: obs,
                grid: belief.grid.clone(),
            });
        }
    }
    if c > cfg.c_max {
        log.status = Status::Success;
    }
    Ok(EpisodeOutcome {
        log,
        timing,
        tokens,
        snapshots,
    })
}

/// Renders the view the sensor actually takes from body pose `v`.
pub(crate) fn observe(oracle: &RolloutOracle, cfg: &EpisodeConfig, v: &Viewpoint, jump: f64, seed: u64) -> Result<Observation> {
    let mut obs = render_truth(oracle.truth(), &cfg.sensor.optical_pose(v), &cfg.intrinsics)?;
    apply_noise(&mut obs, &cfg.intrinsics, &cfg.sensor, jump, seed);
    Ok(obs)
}

fn propose(
    cfg: &EpisodeConfig,
    m: &CollisionModel,
    scorer: &Scorer,
    vpformer: Option<&VpFormer>,
    tokens: &TokenSequence,
    t: usize,
    seed: u64,
) -> Result<Vec<ScoredViewpoint>> {
    match cfg.policy {
        Policy::Random => baseline_policy(BaselineKind::Random, m, scorer, cfg.batch, seed),
        Policy::RandomGuided => baseline_policy(BaselineKind::RandomGuided, m, scorer, cfg.guided_samples, seed),
        Policy::BilevelMpc => Ok(bilevel_mpc(m, scorer, &cfg.mpc, seed)?.elites),
        Policy::Vpformer => {
            let model = vpformer.expect("checked by the caller");
            let stage1 = || baseline_policy(BaselineKind::RandomGuided, m, scorer, cfg.mpc.stage1_samples, seed);
            if t < cfg.vpformer_steps && tokens.len() <= model.cfg.max_len {
                let predicted = model.forward_next_viewpoint(tokens)?;
                if cfg.refinement || !m.is_free(&predicted) {
                    match refine_viewpoint(&predicted, [cfg.refine_sigma; 7], scorer, m, cfg.refine_samples, seed) {
                        // Nothing feasible near the prediction.
                        Err(Error::NoFeasibleSamples { .. }) => stage1(),
                        r => r,
                    }
                } else {
                    Ok(vec![ScoredViewpoint {
                        viewpoint: predicted,
                        score: None,
                    }])
                }
            } else {
                stage1()
            }
        }
    }
}

/// Replays an episode's integrated views and checks every executed path
/// against the collision model of its step with the dense validator.
pub fn audit_paths(spec: &SceneSpec, cfg: &EpisodeConfig, log: &EpisodeLog) -> Result<Vec<(usize, String)>> {
    let reg = cfg.registration();
    let ws = Workspace::of(spec);
    let oracle = RolloutOracle::new(spec, cfg.intrinsics, reg, cfg.sensor);
    let jump = 2.0 * spec.dims.resolution;
    let mut belief = Belief::new(spec.dims, reg.eta);
    let mut violations = Vec::new();
    for s in &log.steps {
        let m = build_collision_model(&belief.grid, &belief.store, &ws, &cfg.motion);
        if s.path.len() < 2 {
            violations.push((s.iteration, "path has fewer than two waypoints".to_string()));
        } else {
            let path = Path {
                waypoints: s.path.clone(),
                stamp: 0,
            };
            if let Err(v) = crate::motion::validate_path(&path, &m) {
                violations.push((s.iteration, v.to_string()));
            }
        }
        if !s.discarded {
            let obs = observe(&oracle, cfg, &s.executed, jump, s.observation_seed)?;
            belief.integrate(&obs, &cfg.intrinsics, &reg, s.observation_seed)?;
        }
    }
    Ok(violations)
}
