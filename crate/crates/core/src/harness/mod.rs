//! The active-sensing episode loop, benchmark metrics and file exports.

mod benchmark;
mod config;
mod episode;
mod export;

pub use benchmark::{benchmark_scene_seed, metrics_table, run_benchmark, Benchmark, BucketMetrics, MetricsTable, PolicyMetrics, Stat};
pub use config::{EpisodeConfig, Policy};
pub use episode::{
    audit_paths, run_episode, run_episode_with, start_pose, EpisodeLog, EpisodeOutcome, EpisodeTiming, Models, RunOptions,
    Snapshot, Status, StepRecord,
};
pub use export::{
    belief_ppm, episodes_jsonl, export_artifacts, metrics_csv, summary_csv, timings_csv, Artifacts, ManifestEntry, METRICS_HEADER,
};
