use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::benchmark::MetricsTable;
use super::episode::{EpisodeLog, EpisodeTiming, Snapshot};
use crate::error::{Error, Result};
use crate::scene::{BeliefGrid, CellState};
use crate::sensor::pgm::{depth_pgm, instance_pgm};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory, with `/` separators.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub const METRICS_HEADER: &str =
    "policy,scene_seed,scene_volume,score,completion,refinement,status,viewpoints,discarded,final_coverage,cspace,workspace";

/// One row per episode.
pub fn metrics_csv(logs: &[EpisodeLog]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for l in logs {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            l.policy,
            l.scene_seed,
            l.scene_volume,
            serde_json::to_value(l.score).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            l.completion,
            l.refinement,
            l.status.name(),
            l.viewpoints(),
            l.discarded(),
            l.final_coverage(),
            l.cspace(),
            l.workspace()
        );
    }
    s
}

/// Per-policy aggregates, with the small/medium/large buckets.
pub fn summary_csv(table: &MetricsTable) -> String {
    let mut s = String::from(
        "policy,episodes,viewpoints_mean,viewpoints_std,success_rate,cspace_mean,cspace_std,workspace_mean,workspace_std,\
         small_viewpoints,small_success,medium_viewpoints,medium_success,large_viewpoints,large_success\n",
    );
    for p in &table.policies {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            p.policy,
            p.episodes,
            p.viewpoints.mean,
            p.viewpoints.std,
            p.success_rate,
            p.cspace.mean,
            p.cspace.std,
            p.workspace.mean,
            p.workspace.std
        );
        for b in &p.buckets {
            let _ = write!(s, ",{},{}", b.viewpoints.mean, b.success_rate);
        }
        s.push('\n');
    }
    s
}

pub fn episodes_jsonl(logs: &[EpisodeLog]) -> Result<String> {
    let mut s = String::new();
    for l in logs {
        s.push_str(&serde_json::to_string(l)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn timings_csv(logs: &[EpisodeLog], timings: &[EpisodeTiming]) -> String {
    let mut s = String::from("policy,scene_seed,iteration,planning_seconds\n");
    for (l, t) in logs.iter().zip(timings) {
        for (i, secs) in t.planning_seconds.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{:.6}", l.policy, l.scene_seed, i, secs);
        }
    }
    s
}

fn color(c: CellState) -> [u8; 3] {
    match c {
        CellState::Unknown => [96, 96, 96],
        CellState::Free => [255, 255, 255],
        CellState::Seen => [40, 90, 220],
        CellState::Predicted => [240, 150, 30],
    }
}

/// Orthographic view of the belief along `axis`: each pixel shows the first
/// non-free voxel met from the low side, or white if the column is free.
pub fn belief_ppm(grid: &BeliefGrid, axis: usize) -> Vec<u8> {
    let d = grid.dims();
    let n = d.counts();
    let (u_ax, v_ax) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (w, h) = (n[u_ax], n[v_ax]);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for row in 0..h {
        // Image rows run top-down; the vertical grid axis runs bottom-up.
        let vv = h - 1 - row;
        for u in 0..w {
            let mut px = color(CellState::Free);
            for s in 0..n[axis] {
                let mut c = [0usize; 3];
                c[axis] = s;
                c[u_ax] = u;
                c[v_ax] = vv;
                let st = grid.state_at(c[0], c[1], c[2]);
                if st != CellState::Free {
                    px = color(st);
                    break;
                }
            }
            out.extend_from_slice(&px);
        }
    }
    out
}

struct Writer {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Writer {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }
}

/// Artifacts of a run. `snapshots[i]` belongs to `logs[i]` and may be empty.
pub struct Artifacts<'a> {
    pub logs: &'a [EpisodeLog],
    pub timings: &'a [EpisodeTiming],
    pub table: Option<&'a MetricsTable>,
    pub snapshots: &'a [Vec<Snapshot>],
}

/// Writes CSV/JSONL tables, image snapshots and `manifest.json` (every
/// other file with its size and SHA-256) into `out`.
pub fn export_artifacts(a: &Artifacts, out: &Path) -> Result<Vec<ManifestEntry>> {
    let mut w = Writer {
        root: out.to_path_buf(),
        entries: Vec::new(),
    };
    w.put("metrics.csv", metrics_csv(a.logs).as_bytes())?;
    w.put("episodes.jsonl", episodes_jsonl(a.logs)?.as_bytes())?;
    w.put("timings.csv", timings_csv(a.logs, a.timings).as_bytes())?;
    if let Some(t) = a.table {
        w.put("summary.csv", summary_csv(t).as_bytes())?;
        w.put("summary.json", serde_json::to_string_pretty(t)?.as_bytes())?;
    }
    for (i, (l, snaps)) in a.logs.iter().zip(a.snapshots).enumerate() {
        for s in snaps {
            let dir = format!("snapshots/{i:03}_{}_{}", l.policy.name().to_ascii_lowercase(), l.scene_seed);
            w.put(&format!("{dir}/step{:02}_depth.pgm", s.t), &depth_pgm(&s.observation))?;
            w.put(&format!("{dir}/step{:02}_instance.pgm", s.t), &instance_pgm(&s.observation))?;
            for (axis, name) in ["x", "y", "z"].iter().enumerate() {
                w.put(&format!("{dir}/step{:02}_belief_{name}.ppm", s.t), &belief_ppm(&s.grid, axis))?;
            }
        }
    }
    let mut entries = w.entries.clone();
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    w.put("manifest.json", serde_json::to_string_pretty(&entries)?.as_bytes())?;
    Ok(entries)
}
