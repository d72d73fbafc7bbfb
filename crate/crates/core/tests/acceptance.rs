//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test -p nbv --test acceptance -- 1 4 12`.
//! Failures are reported but only fail the process when
//! `NBV_ACCEPTANCE_STRICT` is set, since some criteria are empirical
//! orderings that a faithful implementation may legitimately miss.

use std::cell::{OnceCell, RefCell};
use std::io::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use nbv::harness::{audit_paths, episodes_jsonl, metrics_csv, run_benchmark, run_episode, Benchmark, EpisodeConfig, EpisodeLog, Models, Policy};
use nbv::motion::{build_collision_model, Workspace};
use nbv::mpc::{bilevel_mpc, MpcParams};
use nbv::registration::{chamfer, merge_instances, Belief, InstanceStore, MergeMethod, PartialCloud};
use nbv::rng;
use nbv::scene::{camera_base, coverage, generate_scene, DomainRandomizationConfig, Face, GroundTruth};
use nbv::score::{ScoreKind, ScoreModel, Scorer, Surrogate, FeatureSpec, VIEW_FEATURES};
use nbv::sensor::{carve_visibility, render_truth, SensorConfig};
use nbv::vpformer::{attention_weights, bc_loss_and_grad, causal_mask, collect_expert_data, train_bc, BcHyper, BcReport, Example, Token, TokenSequence, VpConfig, VpFormer};
use nbv::{Aabb, BeliefGrid, CameraIntrinsics, CellState, GridDims, Observation, Point3, SceneSpec, Vector3, Viewpoint};
use rand::Rng;

const BENCH_SCENES: usize = 30;
const BENCH_SEED: u64 = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Expensive results shared between criteria.
#[derive(Default)]
struct Shared {
    table1: OnceCell<(Benchmark, f64)>,
    vpformer: OnceCell<(VpFormer, BcReport, usize)>,
    vp_runs: OnceCell<[Benchmark; 3]>,
}

fn benchmark_config() -> EpisodeConfig {
    EpisodeConfig {
        score: ScoreKind::RolloutLabeler,
        ..EpisodeConfig::default()
    }
}

impl Shared {
    fn table1(&self) -> &(Benchmark, f64) {
        self.table1.get_or_init(|| {
            let t = Instant::now();
            let b = run_benchmark(
                BENCH_SCENES,
                &[Policy::Random, Policy::RandomGuided, Policy::BilevelMpc],
                &benchmark_config(),
                &DomainRandomizationConfig::default(),
                &Models::default(),
                BENCH_SEED,
            )
            .expect("benchmark runs");
            (b, t.elapsed().as_secs_f64())
        })
    }

    fn vpformer(&self) -> &(VpFormer, BcReport, usize) {
        self.vpformer.get_or_init(|| {
            // Expert rollouts use a tenth of the planner's sample budget so
            // that 200 episodes collect in about seven minutes on one core.
            let cfg = EpisodeConfig {
                mpc: MpcParams::default().scaled(10),
                ..benchmark_config()
            };
            let data = collect_expert_data(200, 1, &cfg, &DomainRandomizationConfig::default(), &Models::default()).expect("expert data");
            let n = data.len();
            let hyper = BcHyper {
                epochs: 150,
                ..BcHyper::default()
            };
            let (model, report) = train_bc(&data, VpConfig::default(), &hyper).expect("behavior cloning");
            (model, report, n)
        })
    }

    /// Sequence policy on the benchmark scenes: full, completion off,
    /// refinement off.
    fn vp_runs(&self) -> &[Benchmark; 3] {
        self.vp_runs.get_or_init(|| {
            let (model, _, _) = self.vpformer();
            let models = Models {
                surrogate: None,
                vpformer: Some(model),
            };
            let run = |cfg: EpisodeConfig| {
                run_benchmark(BENCH_SCENES, &[Policy::Vpformer], &cfg, &DomainRandomizationConfig::default(), &models, BENCH_SEED).expect("benchmark runs")
            };
            [
                run(benchmark_config()),
                run(EpisodeConfig {
                    completion: false,
                    ..benchmark_config()
                }),
                run(EpisodeConfig {
                    refinement: false,
                    ..benchmark_config()
                }),
            ]
        })
    }
}

fn mean_views(logs: &[EpisodeLog], p: Policy) -> f64 {
    let xs: Vec<f64> = logs.iter().filter(|l| l.policy == p).map(|l| l.viewpoints() as f64).collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn success_rate(logs: &[EpisodeLog], p: Policy) -> f64 {
    let xs: Vec<bool> = logs.iter().filter(|l| l.policy == p).map(|l| l.success()).collect();
    xs.iter().filter(|s| **s).count() as f64 / xs.len() as f64
}

// ---------------------------------------------------------------------------
// 1. Carving against a per-voxel projection oracle.

/// Marks FREE every voxel whose center projects into a pixel with a farther
/// measured depth and lies within the carve range, then marks hit voxels
/// SEEN. Visits every voxel of the grid.
fn projection_oracle(g: &mut BeliefGrid, obs: &Observation, intr: &CameraIntrinsics) {
    let dims = *g.dims();
    let f = intr.focal();
    let range = intr.carve_range(dims.resolution);
    let (w, h) = (intr.width as f64, intr.height as f64);
    let inv = obs.viewpoint.orientation.inverse();
    for idx in 0..dims.len() {
        let [i, j, k] = dims.coords(idx);
        let p = inv * (dims.voxel_center(i, j, k) - obs.viewpoint.position);
        if p.z <= 0.0 {
            continue;
        }
        let u = f * p.x / p.z + w / 2.0;
        let v = f * p.y / p.z + h / 2.0;
        if !(0.0..w).contains(&u) || !(0.0..h).contains(&v) {
            continue;
        }
        let px = v.floor() as usize * intr.width + u.floor() as usize;
        let d = p.norm();
        if d < range && d < obs.depth[px] {
            g.set_free(idx);
        }
    }
    for (px, hit) in obs.hit_voxel.iter().enumerate() {
        if let (Some(idx), true) = (hit, obs.depth[px].is_finite()) {
            g.set_seen(*idx as usize, obs.instance[px]);
        }
    }
}

fn random_cube_scene(seed: u64) -> SceneSpec {
    let mut r = rng::stream(seed, 0xC1);
    let res = r.random_range(0.04..0.12);
    let dims = GridDims::new(8, 8, 8, res, Point3::origin()).unwrap();
    let opening = Face::from_axis(r.random_range(0..3), r.random_bool(0.5));
    let mut spec = SceneSpec::empty(dims, opening, camera_base(&dims, opening, 0.3, 0.0));
    let mut taken = vec![false; dims.len()];
    for _ in 0..r.random_range(1..5) {
        let lo: [u32; 3] = std::array::from_fn(|_| r.random_range(0..7));
        let size: [u32; 3] = std::array::from_fn(|_| r.random_range(1..4));
        let mut voxels = Vec::new();
        for k in lo[2]..(lo[2] + size[2]).min(8) {
            for j in lo[1]..(lo[1] + size[1]).min(8) {
                for i in lo[0]..(lo[0] + size[0]).min(8) {
                    let idx = dims.index(i as usize, j as usize, k as usize);
                    if !taken[idx] {
                        taken[idx] = true;
                        voxels.push([i, j, k]);
                    }
                }
            }
        }
        if !voxels.is_empty() {
            spec.push_voxel_object(voxels);
        }
    }
    spec
}

fn random_point_in(r: &mut rng::Rng, b: &Aabb) -> Point3 {
    Point3::new(
        r.random_range(b.min.x..b.max.x),
        r.random_range(b.min.y..b.max.y),
        r.random_range(b.min.z..b.max.z),
    )
}

fn criterion_1(_: &Shared) -> Outcome {
    let t = Instant::now();
    let intr = CameraIntrinsics::default();
    let (mut mismatched, mut wrong_coverage, mut unsound, mut free_total) = (0usize, 0usize, 0usize, 0usize);
    for s in 0..200u64 {
        let spec = random_cube_scene(s);
        let gt = GroundTruth::new(&spec);
        let dims = spec.dims;
        let b = dims.bounds();
        let pad = Vector3::repeat(dims.extent()[0] * 0.5);
        let outer = Aabb::new(b.min - pad, b.max + pad);
        let mut r = rng::stream(s, 0xC1C1);
        let mut grid = BeliefGrid::unknown(dims);
        let mut oracle = grid.clone();
        for _ in 0..2 {
            let eye = loop {
                let p = random_point_in(&mut r, &outer);
                if dims.voxel_of(&p).is_none_or(|[i, j, k]| !gt.is_occupied(dims.index(i, j, k))) {
                    break p;
                }
            };
            let v = Viewpoint::look_at(eye, random_point_in(&mut r, &b));
            let obs = render_truth(&gt, &v, &intr).unwrap();
            grid = carve_visibility(&grid, &obs, &intr).unwrap();
            projection_oracle(&mut oracle, &obs, &intr);
        }
        mismatched += (0..dims.len())
            .filter(|&i| grid.state(i) != oracle.state(i) || grid.instance_id(i) != oracle.instance_id(i))
            .count();
        unsound += (0..dims.len()).filter(|&i| grid.state(i) == CellState::Free && gt.is_occupied(i)).count();
        free_total += grid.count(CellState::Free);
        let known = grid.cells().iter().filter(|c| **c != CellState::Unknown).count();
        if coverage(&grid) != known as f64 / dims.len() as f64 {
            wrong_coverage += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        mismatched == 0 && wrong_coverage == 0 && unsound == 0 && free_total > 0 && secs < 10.0,
        format!("200 scenes, {mismatched} voxel mismatches, {wrong_coverage} coverage mismatches, {unsound} occupied voxels carved, {free_total} free voxels, {secs:.2} s"),
    )
}

// ---------------------------------------------------------------------------
// 2. Chamfer distance.

fn chamfer_oracle(a: &[Point3], b: &[Point3]) -> f64 {
    let one_way = |x: &[Point3], y: &[Point3]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / x.len() as f64
    };
    one_way(a, b) + one_way(b, a)
}

fn random_cloud(r: &mut rng::Rng, n: usize) -> Vec<Point3> {
    (0..n).map(|_| Point3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect()
}

fn criterion_2(_: &Shared) -> Outcome {
    let mut r = rng::from_seed(0xC2);
    let x = random_cloud(&mut r, 50);
    let identity = chamfer(&x, &x).unwrap();
    let single = chamfer(&[Point3::origin()], &[Point3::new(1.0, 0.0, 0.0)]).unwrap();
    let (mut worst_sym, mut worst_oracle) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let a = random_cloud(&mut r, 50);
        let b = random_cloud(&mut r, 50);
        let ab = chamfer(&a, &b).unwrap();
        let ba = chamfer(&b, &a).unwrap();
        worst_sym = worst_sym.max((ab - ba).abs());
        worst_oracle = worst_oracle.max((ab - chamfer_oracle(&a, &b)).abs());
    }
    outcome(
        identity == 0.0 && single == 2.0 && worst_sym <= 1e-12 && worst_oracle <= 1e-12,
        format!("identity {identity}, singleton {single}, max asymmetry {worst_sym:.1e}, max oracle gap {worst_oracle:.1e}"),
    )
}

// ---------------------------------------------------------------------------
// 3. Attention rows and causality of the full model.

fn random_sequence(cfg: &VpConfig, len: usize, r: &mut rng::Rng) -> TokenSequence {
    let dims = GridDims::new(20, 40, 12, 0.05, Point3::origin()).unwrap();
    let bounds = Aabb::new(Point3::new(-0.6, -0.2, -0.1), Point3::new(1.0, 2.2, 0.7));
    let mut c = 0.0;
    let tokens = (0..len)
        .map(|_| {
            c += r.random_range(0.0..0.2);
            Token {
                coverage: c,
                features: (0..cfg.features.len()).map(|_| r.random::<f64>()).collect(),
                viewpoint: Viewpoint::look_at(random_point_in(r, &bounds), dims.center()),
            }
        })
        .collect();
    TokenSequence { dims, bounds, tokens }
}

fn criterion_3(_: &Shared) -> Outcome {
    let mut r = rng::from_seed(0xC3);
    let mut worst_row = 0.0f64;
    let mut leaked = 0usize;
    for _ in 0..100 {
        let (n, d) = (r.random_range(1..=8), r.random_range(1..=32));
        let q = DMatrix::from_fn(n, d, |_, _| r.random_range(-3.0..3.0));
        let k = DMatrix::from_fn(n, d, |_, _| r.random_range(-3.0..3.0));
        let a = attention_weights(&q, &k, &causal_mask(n)).unwrap();
        for i in 0..n {
            worst_row = worst_row.max((a.row(i).sum() - 1.0).abs());
            leaked += (i + 1..n).filter(|&j| a[(i, j)] != 0.0).count();
        }
    }
    let cfg = VpConfig::default();
    let model = VpFormer::new(cfg, 5).unwrap();
    let (mut changed_before, mut unchanged_at) = (0usize, 0usize);
    for _ in 0..100 {
        let len = r.random_range(2..=cfg.max_len);
        let seq = random_sequence(&cfg, len, &mut r);
        let base = model.forward_all(&seq).unwrap();
        let j = r.random_range(1..len);
        let mut other = seq.clone();
        let fresh = random_sequence(&cfg, 1, &mut r).tokens.remove(0);
        other.tokens[j] = Token {
            coverage: other.tokens[j].coverage,
            ..fresh
        };
        let y = model.forward_all(&other).unwrap();
        changed_before += (0..j).filter(|&i| y[i] != base[i]).count();
        if y[j] == base[j] {
            unchanged_at += 1;
        }
    }
    outcome(
        worst_row <= 1e-9 && leaked == 0 && changed_before == 0 && unchanged_at == 0,
        format!(
            "max row error {worst_row:.1e}, {leaked} masked weights nonzero; 100 sequences: {changed_before} earlier outputs changed, {unchanged_at} perturbed positions unchanged"
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Analytic gradients against central differences.

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

/// Checks `per_tensor` random entries of every tensor; returns
/// `(tensors, checked, failures, worst)`.
fn check_tensors(
    tensors: &[(String, usize, usize)],
    params: &[f64],
    analytic: &[f64],
    per_tensor: usize,
    r: &mut rng::Rng,
    loss: impl Fn(&[f64]) -> f64,
) -> (usize, usize, Vec<String>, f64) {
    let h = 1e-6;
    let mut p = params.to_vec();
    let (mut checked, mut worst) = (0, 0.0f64);
    let mut failures = Vec::new();
    for (name, offset, len) in tensors {
        let picks: Vec<usize> = if *len <= per_tensor {
            (0..*len).collect()
        } else {
            (0..per_tensor).map(|_| r.random_range(0..*len)).collect()
        };
        for k in picks {
            let i = offset + k;
            p[i] = params[i] + h;
            let up = loss(&p);
            p[i] = params[i] - h;
            let down = loss(&p);
            p[i] = params[i];
            let e = rel_err(analytic[i], (up - down) / (2.0 * h));
            worst = worst.max(e);
            checked += 1;
            if e >= 1e-3 {
                failures.push(format!("{name}[{k}]"));
            }
        }
    }
    (tensors.len(), checked, failures, worst)
}

fn criterion_4(_: &Shared) -> Outcome {
    let mut r = rng::from_seed(0xC4);
    let spec = FeatureSpec::default();
    let sur = Surrogate::new(spec, 3);
    let pairs: Vec<(Vec<f64>, [f64; VIEW_FEATURES], f64)> = (0..8)
        .map(|_| {
            let f = (0..spec.len()).map(|_| r.random::<f64>()).collect();
            let v = std::array::from_fn(|_| r.random_range(-1.0..1.0));
            (f, v, r.random::<f64>())
        })
        .collect();
    let batch: Vec<_> = pairs.iter().map(|(f, v, y)| (f.as_slice(), v, *y)).collect();
    let mut g = vec![0.0; sur.params.len()];
    sur.loss_and_grad(&batch, &mut g);
    let tensors: Vec<_> = sur.layout.tensors.iter().map(|t| (t.name.clone(), t.offset, t.len())).collect();
    let scratch = RefCell::new(sur.clone());
    let s = check_tensors(&tensors, &sur.params, &g, 10, &mut r, |p| {
        let mut m = scratch.borrow_mut();
        m.params.copy_from_slice(p);
        m.loss_and_grad(&batch, &mut vec![0.0; p.len()])
    });

    let cfg = VpConfig::default();
    let vp = VpFormer::new(cfg, 4).unwrap();
    let examples: Vec<Example> = (0..3)
        .map(|_| {
            let len = r.random_range(2..=cfg.max_len);
            let seq = random_sequence(&cfg, len, &mut r);
            let bounds = seq.bounds;
            let targets = (0..len).map(|_| Viewpoint::look_at(random_point_in(&mut r, &bounds), seq.dims.center()).canonical().to_vec7()).collect();
            (seq, targets)
        })
        .collect();
    let refs: Vec<&Example> = examples.iter().collect();
    let mut g = vec![0.0; vp.params.len()];
    bc_loss_and_grad(&vp, &refs, &mut g).unwrap();
    let tensors: Vec<_> = vp.layout.tensors.iter().map(|t| (t.name.clone(), t.offset, t.len())).collect();
    let scratch = RefCell::new(vp.clone());
    let v = check_tensors(&tensors, &vp.params, &g, 10, &mut r, |p| {
        let mut m = scratch.borrow_mut();
        m.params.copy_from_slice(p);
        bc_loss_and_grad(&m, &refs, &mut vec![0.0; p.len()]).unwrap()
    });
    let pass = s.2.is_empty() && v.2.is_empty();
    let mut detail = format!(
        "surrogate {} tensors / {} entries, worst {:.1e}; sequence model {} tensors / {} entries, worst {:.1e}",
        s.0, s.1, s.3, v.0, v.1, v.3
    );
    for f in s.2.iter().chain(&v.2).take(5) {
        detail.push_str(&format!("; failed {f}"));
    }
    outcome(pass, detail)
}

// ---------------------------------------------------------------------------
// 5. Cross-entropy behavior with the heuristic score.

fn criterion_5(_: &Shared) -> Outcome {
    let dr = DomainRandomizationConfig::default();
    let cfg = EpisodeConfig::default();
    let intr = cfg.intrinsics;
    let reg = cfg.registration();
    let model = ScoreModel::Heuristic;
    let params = MpcParams::default();
    let (mut monotone, mut five, mut fifty) = (0usize, 0usize, 0usize);
    let n = 100;
    for i in 0..n {
        let spec = generate_scene(&dr, rng::derive(0xC5, i as u64) >> 1).unwrap();
        let gt = GroundTruth::new(&spec);
        let ws = Workspace::of(&spec);
        let mut belief = Belief::new(spec.dims, reg.eta);
        let m0 = build_collision_model(&belief.grid, &belief.store, &ws, &cfg.motion);
        let first = Viewpoint::look_at(m0.staging.center(), spec.dims.center());
        belief.integrate(&render_truth(&gt, &first, &intr).unwrap(), &intr, &reg, i as u64).unwrap();
        let m = build_collision_model(&belief.grid, &belief.store, &ws, &cfg.motion);
        let scorer = Scorer::new(&model, &belief, spec.opening, &intr, SensorConfig::default(), None, i as u64).unwrap();
        let out = bilevel_mpc(&m, &scorer, &params, i as u64).unwrap();
        let best = out.best_scores();
        if best.len() == params.n_iter {
            five += 1;
            if best.windows(2).all(|w| w[1] >= w[0]) {
                monotone += 1;
            }
        }
        if out.elites.len() == 50 {
            fifty += 1;
        }
    }
    let rate = monotone as f64 / n as f64;
    outcome(
        rate >= 0.95 && fifty == n,
        format!("{n} scenes: best elite non-decreasing in {monotone}, all {} iterations sampled in {five}, final elite count 50 in {fifty}", params.n_iter),
    )
}

// ---------------------------------------------------------------------------
// 6. Policy ordering.

fn criterion_6(s: &Shared) -> Outcome {
    let (b, secs) = s.table1();
    let v = |p| mean_views(&b.logs, p);
    let sr = |p| success_rate(&b.logs, p);
    let (vr, vg, vm) = (v(Policy::Random), v(Policy::RandomGuided), v(Policy::BilevelMpc));
    let (sr_r, sr_g, sr_m) = (sr(Policy::Random), sr(Policy::RandomGuided), sr(Policy::BilevelMpc));
    let views_ok = vm < vg && vg < vr;
    let success_ok = sr_m > sr_g && sr_g > sr_r;
    outcome(
        views_ok && success_ok && *secs < 900.0,
        format!(
            "{BENCH_SCENES} scenes, views MPC {vm:.2} / RG {vg:.2} / RANDOM {vr:.2} ({}), success {sr_m:.2} / {sr_g:.2} / {sr_r:.2} ({}), {secs:.0} s",
            if views_ok { "ordered" } else { "not ordered" },
            if success_ok { "ordered" } else { "not strictly ordered" },
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Coverage within six views.

fn criterion_7(_: &Shared) -> Outcome {
    let n = 10;
    let cfg = EpisodeConfig {
        c_max: 0.9,
        t_max: 6,
        ..benchmark_config()
    };
    let b = run_benchmark(n, &[Policy::BilevelMpc], &cfg, &DomainRandomizationConfig::default(), &Models::default(), BENCH_SEED).unwrap();
    let reached = b
        .logs
        .iter()
        .filter(|l| l.steps.iter().filter(|s| !s.discarded).take(6).any(|s| s.coverage >= 0.9))
        .count();
    let rate = reached as f64 / n as f64;
    outcome(rate >= 0.7, format!("{reached}/{n} scenes reach 0.9 within 6 views"))
}

// ---------------------------------------------------------------------------
// 8. Ablations on the sequence policy.

fn criterion_8(s: &Shared) -> Outcome {
    let [full, no_completion, no_refinement] = s.vp_runs();
    let v = |b: &Benchmark| mean_views(&b.logs, Policy::Vpformer);
    let (f, c, r) = (v(full), v(no_completion), v(no_refinement));
    outcome(
        c >= f && r >= f,
        format!("{BENCH_SCENES} scenes, mean views: both on {f:.2}, completion off {c:.2}, refinement off {r:.2}"),
    )
}

// ---------------------------------------------------------------------------
// 9. Behavior cloning.

fn criterion_9(s: &Shared) -> Outcome {
    let (_, report, n) = s.vpformer();
    let init = report.eval_loss[0];
    let best = report.best_eval();
    let vp = mean_views(&s.vp_runs()[0].logs, Policy::Vpformer);
    let mpc = mean_views(&s.table1().0.logs, Policy::BilevelMpc);
    outcome(
        best <= 0.7 * init && vp <= mpc + 1.0,
        format!(
            "{n} expert episodes, held-out MSE {init:.4} -> {best:.4} ({:.2}x); {BENCH_SCENES} held-out scenes, views sequence policy {vp:.2} vs planner {mpc:.2}",
            best / init
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. Path audit.

fn criterion_10(s: &Shared) -> Outcome {
    let dr = DomainRandomizationConfig::default();
    let mut logs: Vec<(&EpisodeLog, EpisodeConfig)> = s.table1().0.logs.iter().map(|l| (l, benchmark_config())).collect();
    if let Some(runs) = s.vp_runs.get() {
        for (b, cfg) in runs.iter().zip([
            benchmark_config(),
            EpisodeConfig {
                completion: false,
                ..benchmark_config()
            },
            EpisodeConfig {
                refinement: false,
                ..benchmark_config()
            },
        ]) {
            logs.extend(b.logs.iter().map(|l| (l, cfg.clone())));
        }
    }
    let (mut paths, mut violations) = (0usize, 0usize);
    for (log, cfg) in &logs {
        let spec = generate_scene(&dr, log.scene_seed).unwrap();
        let cfg = EpisodeConfig {
            policy: log.policy,
            seed: BENCH_SEED,
            ..cfg.clone()
        };
        paths += log.steps.len();
        violations += audit_paths(&spec, &cfg, log).unwrap().len();
    }
    outcome(violations == 0 && paths > 0, format!("{} episodes, {paths} paths, {violations} violations", logs.len()))
}

// ---------------------------------------------------------------------------
// 11. Determinism.

fn criterion_11(s: &Shared) -> Outcome {
    let mut cfg = benchmark_config();
    cfg.mpc = MpcParams::default().scaled(20);
    cfg.sensor.depth_sigma = 0.005;
    cfg.sensor.edge_dropout = 0.1;
    cfg.motion.sigma_pos = 0.004;
    cfg.motion.sigma_ang = 0.02;
    cfg.miss_prob = 0.1;
    let dr = DomainRandomizationConfig::default();
    let run = || {
        let b = run_benchmark(3, &[Policy::Random, Policy::RandomGuided, Policy::BilevelMpc], &cfg, &dr, &Models::default(), 17).unwrap();
        (episodes_jsonl(&b.logs).unwrap(), metrics_csv(&b.logs))
    };
    let (a, b) = (run(), run());
    let same_bench = a == b;
    // A single episode reproduces its benchmark row.
    let table = &s.table1().0;
    let row = &table.logs[1];
    let spec = generate_scene(&dr, row.scene_seed).unwrap();
    let again = run_episode(
        &spec,
        &EpisodeConfig {
            policy: row.policy,
            seed: BENCH_SEED,
            ..benchmark_config()
        },
        &Models::default(),
    )
    .unwrap();
    let same_row = episodes_jsonl(std::slice::from_ref(&again)).unwrap() == episodes_jsonl(std::slice::from_ref(row)).unwrap();
    outcome(
        same_bench && same_row,
        format!(
            "noisy 3-scene benchmark rerun {}; {} episode replayed alone {}",
            if same_bench { "byte-identical" } else { "differs" },
            row.policy,
            if same_row { "byte-identical" } else { "differs" }
        ),
    )
}

// ---------------------------------------------------------------------------
// 12. Merge rule.

fn min_dist(a: &[Point3], b: &[Point3]) -> f64 {
    a.iter().flat_map(|p| b.iter().map(move |q| (p - q).norm())).fold(f64::INFINITY, f64::min)
}

/// Expected target of one cloud: the closest instance within `eta`, lower
/// id on ties, else a new id.
fn expected_target(store: &InstanceStore, cloud: &[Point3], eta: f64) -> u32 {
    let mut best: Option<(f64, u32)> = None;
    for inst in store.instances() {
        let d = min_dist(cloud, &inst.points);
        if d < eta && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, inst.id));
        }
    }
    best.map_or(store.len() as u32, |(_, id)| id)
}

fn partition(s: &InstanceStore) -> Vec<Vec<[u64; 3]>> {
    let mut sets: Vec<Vec<[u64; 3]>> = s
        .instances()
        .iter()
        .map(|i| {
            let mut ps: Vec<[u64; 3]> = i.points.iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
            ps.sort();
            ps
        })
        .collect();
    sets.sort();
    sets
}

fn criterion_12(_: &Shared) -> Outcome {
    let dims = GridDims::new(40, 40, 40, 0.025, Point3::new(-0.5, -0.5, -0.5)).unwrap();
    let mut r = rng::from_seed(0xC12);
    let (mut merges, mut splits, mut wrong) = (0usize, 0usize, 0usize);
    let unit = |r: &mut rng::Rng| loop {
        let v = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        if v.norm() > 0.1 {
            break v.normalize();
        }
    };
    for case in 0..2000 {
        let eta = r.random_range(0.02..0.15);
        let blobs: Vec<PartialCloud> = (0..3)
            .map(|_| {
                let c = Point3::new(r.random_range(-0.35..0.35), r.random_range(-0.35..0.35), r.random_range(-0.35..0.35));
                PartialCloud::new((0..5).map(|_| c + unit(&mut r) * r.random_range(0.0..0.03)).collect())
            })
            .collect();
        let mut store = InstanceStore::new(&dims, eta);
        for b in &blobs {
            store.merge(std::slice::from_ref(b), eta).unwrap();
        }
        let anchor = {
            let inst = &store.instances()[r.random_range(0..store.len())];
            inst.points[r.random_range(0..inst.points.len())]
        };
        let q = if case % 2 == 0 {
            anchor + unit(&mut r) * (eta * r.random_range(0.0..0.999))
        } else {
            let all: Vec<Point3> = store.instances().iter().flat_map(|i| i.points.clone()).collect();
            loop {
                let q = anchor + unit(&mut r) * (eta * r.random_range(1.001..3.0));
                if min_dist(&[q], &all) > eta * 1.001 {
                    break q;
                }
            }
        };
        let expected = expected_target(&store, &[q], eta);
        if (expected as usize) < store.len() {
            merges += 1;
        } else {
            splits += 1;
        }
        let cloud = PartialCloud::new(vec![q]);
        for m in [MergeMethod::BruteForce, MergeMethod::Hashed] {
            if store.assign(std::slice::from_ref(&cloud), eta, m).unwrap() != vec![expected] {
                wrong += 1;
            }
        }
    }
    // Mutually distant clouds partition the same way in any order.
    let mut order_diffs = 0usize;
    let eta = 0.05;
    for _ in 0..300 {
        let mut centers: Vec<Point3> = Vec::new();
        for _ in 0..6 {
            let c = Point3::new(r.random_range(-0.4..0.4), r.random_range(-0.4..0.4), r.random_range(-0.4..0.4));
            if centers.iter().all(|k| (k - c).norm() > eta + 0.05) {
                centers.push(c);
            }
        }
        let clouds: Vec<PartialCloud> = centers
            .iter()
            .map(|c| PartialCloud::new((0..4).map(|_| c + unit(&mut r) * r.random_range(0.0..0.02)).collect()))
            .collect();
        let empty = InstanceStore::new(&dims, eta);
        let base = partition(&merge_instances(&empty, &clouds, eta).unwrap());
        let mut shuffled = clouds.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut r);
        let mut seq = empty.clone();
        for c in &shuffled {
            seq.merge(std::slice::from_ref(c), eta).unwrap();
        }
        if base.len() != clouds.len() || partition(&merge_instances(&empty, &shuffled, eta).unwrap()) != base || partition(&seq) != base {
            order_diffs += 1;
        }
    }
    outcome(
        wrong == 0 && order_diffs == 0 && merges > 0 && splits > 0,
        format!("{merges} sub-eta and {splits} supra-eta cases x 2 methods, {wrong} wrong; 300 distant-cloud orderings, {order_diffs} differ"),
    )
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn(&Shared) -> Outcome); 12] = [
        (1, "carving matches the projection oracle", criterion_1),
        (2, "chamfer distance", criterion_2),
        (3, "attention rows and causality", criterion_3),
        (4, "gradient checks", criterion_4),
        (5, "cross-entropy iterations", criterion_5),
        (6, "policy ordering", criterion_6),
        (7, "coverage within six views", criterion_7),
        (8, "completion and refinement ablations", criterion_8),
        (9, "behavior cloning", criterion_9),
        (10, "path audit", criterion_10),
        (11, "determinism", criterion_11),
        (12, "merge rule", criterion_12),
    ];
    let shared = Shared::default();
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let o = f(&shared);
        println!(
            "{} criterion {id:>2} ({name}): {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        std::io::stdout().flush().ok();
        if !o.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {} failed {:?}", failed.len(), failed);
    if !failed.is_empty() && std::env::var_os("NBV_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
