use serde::{Deserialize, Serialize};

use super::config::{EpisodeConfig, Policy};
use super::episode::{run_episode_with, EpisodeLog, EpisodeTiming, Models, RunOptions, Status};
use crate::error::Result;
use crate::rng;
use crate::scene::{generate_scene, DomainRandomizationConfig};

/// Seed of the `i`-th evaluation scene. Evaluation seeds keep the top bit
/// clear; training scenes set it, so the two never overlap.
pub fn benchmark_scene_seed(seed: u64, i: usize) -> u64 {
    rng::derive(seed, 0xBE4C_0000 + i as u64) & !(1 << 63)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for fewer than two values.
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        if xs.is_empty() {
            return Stat::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketMetrics {
    pub label: String,
    pub episodes: usize,
    pub viewpoints: Stat,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub policy: Policy,
    pub episodes: usize,
    pub viewpoints: Stat,
    /// Fraction of episodes that exceeded the coverage threshold.
    pub success_rate: f64,
    pub cspace: Stat,
    pub workspace: Stat,
    /// Mean coverage after view 1, 2, ..., carrying each episode's final
    /// value forward once it stops.
    pub coverage_curve: Vec<f64>,
    /// Small, medium and large scenes by volume tercile.
    pub buckets: Vec<BucketMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    /// Volume cut points between the small/medium and medium/large buckets.
    pub volume_terciles: [f64; 2],
    pub policies: Vec<PolicyMetrics>,
}

impl MetricsTable {
    pub fn get(&self, p: Policy) -> Option<&PolicyMetrics> {
        self.policies.iter().find(|m| m.policy == p)
    }
}

/// Terciles of the distinct scene volumes.
fn terciles(logs: &[EpisodeLog]) -> [f64; 2] {
    let mut v: Vec<f64> = logs.iter().map(|l| l.scene_volume).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    if v.is_empty() {
        return [0.0, 0.0];
    }
    let at = |q: f64| v[((v.len() as f64 * q).ceil() as usize).saturating_sub(1).min(v.len() - 1)];
    [at(1.0 / 3.0), at(2.0 / 3.0)]
}

/// Aggregates logs per policy, in the order policies first appear.
pub fn metrics_table(logs: &[EpisodeLog], curve_len: usize) -> MetricsTable {
    let cuts = terciles(logs);
    let mut order: Vec<Policy> = Vec::new();
    for l in logs {
        if !order.contains(&l.policy) {
            order.push(l.policy);
        }
    }
    let policies = order
        .into_iter()
        .map(|p| {
            let ls: Vec<&EpisodeLog> = logs.iter().filter(|l| l.policy == p).collect();
            let n = ls.len();
            let views: Vec<f64> = ls.iter().map(|l| l.viewpoints() as f64).collect();
            let mut curve = vec![0.0; curve_len];
            for l in &ls {
                let c = l.coverage_curve();
                for (i, slot) in curve.iter_mut().enumerate() {
                    *slot += c.get(i).or(c.last()).copied().unwrap_or(0.0) / n as f64;
                }
            }
            let buckets = ["small", "medium", "large"]
                .iter()
                .enumerate()
                .map(|(b, label)| {
                    let inb: Vec<&&EpisodeLog> = ls
                        .iter()
                        .filter(|l| {
                            let v = l.scene_volume;
                            match b {
                                0 => v <= cuts[0],
                                1 => v > cuts[0] && v <= cuts[1],
                                _ => v > cuts[1],
                            }
                        })
                        .collect();
                    let vv: Vec<f64> = inb.iter().map(|l| l.viewpoints() as f64).collect();
                    BucketMetrics {
                        label: label.to_string(),
                        episodes: inb.len(),
                        viewpoints: Stat::of(&vv),
                        success_rate: rate(inb.iter().filter(|l| l.success()).count(), inb.len()),
                    }
                })
                .collect();
            PolicyMetrics {
                policy: p,
                episodes: n,
                viewpoints: Stat::of(&views),
                success_rate: rate(ls.iter().filter(|l| l.success()).count(), n),
                cspace: Stat::of(&ls.iter().map(|l| l.cspace()).collect::<Vec<_>>()),
                workspace: Stat::of(&ls.iter().map(|l| l.workspace()).collect::<Vec<_>>()),
                coverage_curve: curve,
                buckets,
            }
        })
        .collect();
    MetricsTable {
        volume_terciles: cuts,
        policies,
    }
}

fn rate(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    /// Scene-major: every policy on scene 0, then scene 1, ...
    pub logs: Vec<EpisodeLog>,
    pub timings: Vec<EpisodeTiming>,
    pub table: MetricsTable,
}

impl Benchmark {
    /// Mean planning seconds per episode for a policy.
    pub fn planning_time(&self, p: Policy) -> Stat {
        let xs: Vec<f64> = self
            .logs
            .iter()
            .zip(&self.timings)
            .filter(|(l, _)| l.policy == p)
            .map(|(_, t)| t.total())
            .collect();
        Stat::of(&xs)
    }
}

/// Runs every policy on `n_scenes` fresh scenes. Episodes that error are
/// recorded as planning failures.
pub fn run_benchmark(
    n_scenes: usize,
    policies: &[Policy],
    cfg: &EpisodeConfig,
    scenes: &DomainRandomizationConfig,
    models: &Models,
    seed: u64,
) -> Result<Benchmark> {
    cfg.validate()?;
    scenes.validate()?;
    let mut logs = Vec::new();
    let mut timings = Vec::new();
    for i in 0..n_scenes {
        let spec = generate_scene(scenes, benchmark_scene_seed(seed, i))?;
        for &p in policies {
            let ecfg = EpisodeConfig {
                policy: p,
                seed,
                ..cfg.clone()
            };
            match run_episode_with(&spec, &ecfg, models, RunOptions::default()) {
                Ok(o) => {
                    logs.push(o.log);
                    timings.push(o.timing);
                }
                Err(e) => {
                    log::warn!("scene {} policy {p}: {e}", spec.seed);
                    logs.push(EpisodeLog {
                        scene_seed: spec.seed,
                        policy: p,
                        score: ecfg.score,
                        completion: ecfg.completion,
                        refinement: ecfg.refinement,
                        scene_volume: spec.volume(),
                        start: crate::sensor::Viewpoint::look_at(spec.dims.center(), spec.dims.center() + crate::Vector3::x()),
                        steps: Vec::new(),
                        status: Status::PlanningFailure,
                        error: Some(e.to_string()),
                    });
                    timings.push(EpisodeTiming::default());
                }
            }
            let l = logs.last().expect("just pushed");
            log::info!(
                "scene {}/{} {p}: {} after {} views, coverage {:.3}",
                i + 1,
                n_scenes,
                l.status.name(),
                l.viewpoints(),
                l.final_coverage()
            );
        }
    }
    let table = metrics_table(&logs, cfg.t_max);
    Ok(Benchmark { logs, timings, table })
}
