//! `nbv`: scene generation, training, episodes and benchmarks from the shell.
//!
//! Exit codes: 0 success, 1 usage error, 2 episode or benchmark failure,
//! 3 I/O error.

mod args;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use nbv::harness::{
    audit_paths, benchmark_scene_seed, export_artifacts, run_benchmark, run_episode_with, Artifacts, EpisodeConfig, EpisodeLog,
    Models, Policy, RunOptions, Status,
};
use nbv::scene::{generate_scene, DomainRandomizationConfig, SceneSpec};
use nbv::score::{
    generate_training_data, read_pairs_jsonl, train_surrogate, write_pairs_jsonl, DataGenConfig, FeatureSpec, Surrogate,
    SurrogateHyper,
};
use nbv::sensor::{pgm, render_depth, Viewpoint};
use nbv::vpformer::{collect_expert_data, train_bc, BcHyper, ExpertDataset, VpConfig, VpFormer};
use nbv::Point3;

use args::EpisodeArgs;

#[derive(Parser)]
#[command(name = "nbv", version, about = "Active next-best-view planning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate randomized cabinet scenes as JSON.
    SceneGen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        scenes: usize,
        #[arg(long)]
        out: PathBuf,
        /// JSON DomainRandomizationConfig.
        #[arg(long, value_name = "FILE")]
        scene_config: Option<PathBuf>,
    },
    /// Label random viewpoint sequences with coverage rollouts.
    GenData {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        scenes: usize,
        /// Sequences per scene.
        #[arg(long, default_value_t = 1)]
        sequences: usize,
        #[arg(long)]
        length: Option<usize>,
        /// JSON DataGenConfig.
        #[arg(long, value_name = "FILE")]
        data_config: Option<PathBuf>,
        /// Output JSONL file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the surrogate score network to labelled pairs.
    TrainScore {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        /// Pooling blocks along x,y,z.
        #[arg(long, value_delimiter = ',')]
        blocks: Option<Vec<usize>>,
    },
    /// Record planner trajectories on training scenes.
    CollectExpert {
        #[command(flatten)]
        ep: EpisodeArgs,
        #[arg(long, default_value_t = 20)]
        scenes: usize,
        #[arg(long, value_name = "FILE")]
        scene_config: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        surrogate: Option<PathBuf>,
        /// Output JSONL file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Behavior-clone the sequence model from expert trajectories.
    TrainVpformer {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        /// JSON VpConfig.
        #[arg(long, value_name = "FILE")]
        model_config: Option<PathBuf>,
    },
    /// Run one episode and export its artifacts.
    Run {
        #[command(flatten)]
        ep: EpisodeArgs,
        /// Scene JSON; otherwise a scene is generated from --scene-seed.
        #[arg(long, value_name = "FILE")]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        scene_seed: u64,
        #[arg(long, value_name = "FILE")]
        scene_config: Option<PathBuf>,
        #[command(flatten)]
        models: ModelArgs,
        /// Write per-step depth, instance and belief images.
        #[arg(long)]
        snapshots: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run policies over fresh scenes and export metrics.
    Benchmark {
        #[command(flatten)]
        ep: EpisodeArgs,
        #[arg(long, default_value_t = 30)]
        scenes: usize,
        /// Comma-separated; defaults to --policy, or the three planners.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<Policy>>,
        #[arg(long, value_name = "FILE")]
        scene_config: Option<PathBuf>,
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check every executed path of logged episodes.
    ValidatePaths {
        #[command(flatten)]
        ep: EpisodeArgs,
        /// episodes.jsonl from `run` or `benchmark`.
        #[arg(long)]
        episodes: PathBuf,
        /// Scene JSON for every episode; otherwise scenes are regenerated
        /// from their recorded seeds.
        #[arg(long, value_name = "FILE")]
        scene: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        scene_config: Option<PathBuf>,
    },
    /// Render a depth and instance image from one viewpoint.
    Render {
        #[command(flatten)]
        ep: EpisodeArgs,
        #[arg(long, value_name = "FILE")]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        scene_seed: u64,
        #[arg(long, value_name = "FILE")]
        scene_config: Option<PathBuf>,
        /// x,y,z,qw,qx,qy,qz
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "look_from")]
        viewpoint: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "look_at")]
        look_from: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        look_at: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Default, clap::Args)]
struct ModelArgs {
    /// Surrogate parameters from `train-score`.
    #[arg(long, value_name = "FILE")]
    surrogate: Option<PathBuf>,
    /// Sequence model parameters from `train-vpformer`.
    #[arg(long, value_name = "FILE")]
    vpformer: Option<PathBuf>,
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        err: anyhow!(msg.into()),
    }
}

fn failed(err: anyhow::Error) -> Failure {
    Failure { code: 2, err }
}

fn io(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 3, err: err.into() }
}

impl From<nbv::Error> for Failure {
    fn from(e: nbv::Error) -> Self {
        let code = match e {
            nbv::Error::Io { .. } | nbv::Error::Json(_) | nbv::Error::Format(_) => 3,
            nbv::Error::InvalidConfig(_) => 1,
            _ => 2,
        };
        Failure { code, err: e.into() }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(io)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(io)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(io)?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display())).map_err(io)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(io)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display())).map_err(io)?))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display())).map_err(io)?))
}

fn episode_config(ep: &EpisodeArgs) -> CliResult<EpisodeConfig> {
    let mut cfg = match &ep.config {
        Some(p) => read_json(p)?,
        None => EpisodeConfig::default(),
    };
    ep.apply(&mut cfg).map_err(usage)?;
    cfg.validate()?;
    Ok(cfg)
}

fn scene_config(path: &Option<PathBuf>) -> CliResult<DomainRandomizationConfig> {
    let cfg: DomainRandomizationConfig = match path {
        Some(p) => read_json(p)?,
        None => DomainRandomizationConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_scene(file: &Option<PathBuf>, seed: u64, scenes: &Option<PathBuf>) -> CliResult<SceneSpec> {
    match file {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(io)?;
            Ok(SceneSpec::from_json(&text)?)
        }
        None => Ok(generate_scene(&scene_config(scenes)?, seed)?),
    }
}

struct LoadedModels {
    surrogate: Option<Surrogate>,
    vpformer: Option<VpFormer>,
}

impl LoadedModels {
    fn load(m: &ModelArgs) -> CliResult<Self> {
        let read = |p: &PathBuf| fs::read(p).with_context(|| format!("reading {}", p.display())).map_err(io);
        Ok(LoadedModels {
            surrogate: m.surrogate.as_ref().map(|p| read(p).and_then(|b| Ok(Surrogate::from_bytes(&b)?))).transpose()?,
            vpformer: m.vpformer.as_ref().map(|p| read(p).and_then(|b| Ok(VpFormer::from_bytes(&b)?))).transpose()?,
        })
    }

    fn models(&self) -> Models<'_> {
        Models {
            surrogate: self.surrogate.as_ref(),
            vpformer: self.vpformer.as_ref(),
        }
    }
}

fn print_manifest(out: &Path, n: usize) {
    println!("wrote {n} files to {}", out.display());
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::SceneGen {
            seed,
            scenes,
            out,
            scene_config: sc,
        } => {
            let dr = scene_config(&sc)?;
            for i in 0..scenes {
                let spec = generate_scene(&dr, benchmark_scene_seed(seed, i))?;
                let path = out.join(format!("scene_{i:03}.json"));
                write_file(&path, spec.to_json()?.as_bytes())?;
                println!("{} seed {} objects {}", path.display(), spec.seed, spec.objects.len());
            }
        }
        Command::GenData {
            seed,
            scenes,
            sequences,
            length,
            data_config,
            out,
        } => {
            let mut cfg: DataGenConfig = match &data_config {
                Some(p) => read_json(p)?,
                None => DataGenConfig::default(),
            };
            if let Some(l) = length {
                cfg.sequence_length = l;
            }
            let pairs = generate_training_data(scenes, sequences, seed, &cfg)?;
            let mut w = create(&out)?;
            write_pairs_jsonl(&mut w, &pairs)?;
            w.flush().map_err(io)?;
            println!("{} pairs -> {}", pairs.len(), out.display());
        }
        Command::TrainScore {
            data,
            out,
            seed,
            epochs,
            lr,
            batch,
            blocks,
        } => {
            let pairs = read_pairs_jsonl(open(&data)?)?;
            let mut hyper = SurrogateHyper {
                seed,
                ..SurrogateHyper::default()
            };
            set_opt(&mut hyper.epochs, epochs);
            set_opt(&mut hyper.lr, lr);
            set_opt(&mut hyper.batch, batch);
            if blocks.as_ref().is_some_and(|b| b.len() != 3) {
                return Err(usage("--blocks takes 3 comma-separated values"));
            }
            let spec = blocks.map_or(FeatureSpec::default(), |b| FeatureSpec { blocks: [b[0], b[1], b[2]] });
            let (model, report) = train_surrogate(&pairs, spec, &hyper)?;
            write_file(&out, &model.to_bytes())?;
            let report_path = out.with_extension("report.json");
            write_file(&report_path, serde_json::to_string_pretty(&report).map_err(io)?.as_bytes())?;
            println!(
                "eval mse {:.6} (init {:.6}, best epoch {}) -> {}",
                report.best_eval(),
                report.eval_loss[0],
                report.best_epoch,
                out.display()
            );
        }
        Command::CollectExpert {
            ep,
            scenes,
            scene_config: sc,
            surrogate,
            out,
        } => {
            let cfg = episode_config(&ep)?;
            let loaded = LoadedModels::load(&ModelArgs {
                surrogate,
                vpformer: None,
            })?;
            let data = collect_expert_data(scenes, cfg.seed, &cfg, &scene_config(&sc)?, &loaded.models())?;
            let mut w = create(&out)?;
            data.write_jsonl(&mut w)?;
            w.flush().map_err(io)?;
            println!("{} trajectories -> {}", data.len(), out.display());
            if data.len() < scenes {
                return Err(failed(anyhow!("{} of {scenes} expert episodes failed", scenes - data.len())));
            }
        }
        Command::TrainVpformer {
            data,
            out,
            seed,
            epochs,
            lr,
            batch,
            model_config,
        } => {
            let dataset = ExpertDataset::read_jsonl(open(&data)?)?;
            let cfg: VpConfig = match &model_config {
                Some(p) => read_json(p)?,
                None => VpConfig::default(),
            };
            let mut hyper = BcHyper {
                seed,
                ..BcHyper::default()
            };
            set_opt(&mut hyper.epochs, epochs);
            set_opt(&mut hyper.lr, lr);
            set_opt(&mut hyper.batch, batch);
            let (model, report) = train_bc(&dataset, cfg, &hyper)?;
            write_file(&out, &model.to_bytes())?;
            write_file(&out.with_extension("report.json"), serde_json::to_string_pretty(&report).map_err(io)?.as_bytes())?;
            println!(
                "held-out mse {:.6} (init {:.6}, best epoch {}) -> {}",
                report.best_eval(),
                report.eval_loss[0],
                report.best_epoch,
                out.display()
            );
        }
        Command::Run {
            ep,
            scene,
            scene_seed,
            scene_config: sc,
            models,
            snapshots,
            out,
        } => {
            let cfg = episode_config(&ep)?;
            let spec = load_scene(&scene, scene_seed, &sc)?;
            let loaded = LoadedModels::load(&models)?;
            let o = run_episode_with(&spec, &cfg, &loaded.models(), RunOptions { snapshots })?;
            let logs = [o.log];
            let entries = export_artifacts(
                &Artifacts {
                    logs: &logs,
                    timings: std::slice::from_ref(&o.timing),
                    table: None,
                    snapshots: std::slice::from_ref(&o.snapshots),
                },
                &out,
            )?;
            let log = &logs[0];
            println!(
                "{} on scene {}: {} after {} views, coverage {:.4}",
                log.policy,
                log.scene_seed,
                log.status.name(),
                log.viewpoints(),
                log.final_coverage()
            );
            print_manifest(&out, entries.len() + 1);
            if log.status == Status::PlanningFailure {
                return Err(failed(anyhow!("episode ended without a plannable viewpoint")));
            }
        }
        Command::Benchmark {
            ep,
            scenes,
            policies,
            scene_config: sc,
            models,
            out,
        } => {
            if scenes == 0 {
                return Err(usage("--scenes must be at least 1"));
            }
            let cfg = episode_config(&ep)?;
            let policies = policies.unwrap_or_else(|| match ep.policy {
                Some(p) => vec![p],
                None => vec![Policy::Random, Policy::RandomGuided, Policy::BilevelMpc],
            });
            let loaded = LoadedModels::load(&models)?;
            let b = run_benchmark(scenes, &policies, &cfg, &scene_config(&sc)?, &loaded.models(), cfg.seed)?;
            let snaps = vec![Vec::new(); b.logs.len()];
            let entries = export_artifacts(
                &Artifacts {
                    logs: &b.logs,
                    timings: &b.timings,
                    table: Some(&b.table),
                    snapshots: &snaps,
                },
                &out,
            )?;
            for p in &b.table.policies {
                println!(
                    "{:<14} views {:.2} +- {:.2}  success {:.1}%  planning {:.2}s",
                    p.policy.name(),
                    p.viewpoints.mean,
                    p.viewpoints.std,
                    100.0 * p.success_rate,
                    b.planning_time(p.policy).mean
                );
            }
            print_manifest(&out, entries.len() + 1);
            let errors = b.logs.iter().filter(|l| l.error.is_some()).count();
            if errors > 0 {
                return Err(failed(anyhow!("{errors} episodes stopped on an error")));
            }
        }
        Command::ValidatePaths {
            ep,
            episodes,
            scene,
            scene_config: sc,
        } => {
            let cfg = episode_config(&ep)?;
            let text = fs::read_to_string(&episodes).with_context(|| format!("reading {}", episodes.display())).map_err(io)?;
            let fixed = scene.as_ref().map(|_| load_scene(&scene, 0, &sc)).transpose()?;
            let dr = scene_config(&sc)?;
            let (mut paths, mut bad) = (0, 0);
            for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let log: EpisodeLog = serde_json::from_str(line)
                    .with_context(|| format!("{} line {}", episodes.display(), n + 1))
                    .map_err(io)?;
                let spec = match &fixed {
                    Some(s) => s.clone(),
                    None => generate_scene(&dr, log.scene_seed)?,
                };
                let run_cfg = EpisodeConfig {
                    completion: log.completion,
                    ..cfg.clone()
                };
                paths += log.steps.len();
                for (it, msg) in audit_paths(&spec, &run_cfg, &log)? {
                    bad += 1;
                    println!("{} scene {} iteration {it}: {msg}", log.policy, log.scene_seed);
                }
            }
            println!("{paths} paths checked, {bad} violations");
            if bad > 0 {
                return Err(failed(anyhow!("{bad} paths failed validation")));
            }
        }
        Command::Render {
            ep,
            scene,
            scene_seed,
            scene_config: sc,
            viewpoint,
            look_from,
            look_at,
            out,
        } => {
            let cfg = episode_config(&ep)?;
            let spec = load_scene(&scene, scene_seed, &sc)?;
            let lens = [(&viewpoint, 7, "--viewpoint"), (&look_from, 3, "--look-from"), (&look_at, 3, "--look-at")];
            if let Some((_, n, name)) = lens.iter().find(|(v, n, _)| v.as_ref().is_some_and(|v| v.len() != *n)) {
                return Err(usage(format!("{name} takes {n} comma-separated values")));
            }
            let v = match (viewpoint, look_from, look_at) {
                (Some(v), _, _) => Viewpoint::from_vec7(&std::array::from_fn(|i| v[i]))?,
                (None, Some(f), Some(t)) => Viewpoint::look_at(Point3::new(f[0], f[1], f[2]), Point3::new(t[0], t[1], t[2])),
                _ => return Err(usage("give --viewpoint or --look-from with --look-at")),
            };
            let obs = render_depth(&spec, &cfg.sensor.optical_pose(&v), &cfg.intrinsics)?;
            write_file(&out.join("depth.pgm"), &pgm::depth_pgm(&obs))?;
            write_file(&out.join("instance.pgm"), &pgm::instance_pgm(&obs))?;
            let hits = obs.depth.iter().filter(|d| d.is_finite()).count();
            println!("{}x{} image, {hits} pixels with depth -> {}", obs.width, obs.height, out.display());
        }
    }
    Ok(())
}

fn set_opt<T>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
