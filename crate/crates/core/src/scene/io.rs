//! Compact on-disk belief format.
//!
//! The binary part is a 16-byte header followed by run-length encoded cell
//! states:
//!
//! ```text
//! offset size field
//! 0      4    magic "ANSV"
//! 4      2    version (u16 LE)
//! 6      2    nx (u16 LE)
//! 8      2    ny (u16 LE)
//! 10     2    nz (u16 LE)
//! 12     4    run count (u32 LE)
//! 16     5*n  runs: state code (u8) + run length (u32 LE)
//! ```
//!
//! Cells are ordered x-fastest. Resolution, origin and instance labels live
//! in a JSON sidecar.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::scene::{BeliefGrid, CellState, GridDims};

pub const MAGIC: &[u8; 4] = b"ANSV";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub resolution: f64,
    pub origin: Point3,
    /// `(linear index, instance id)` for every labelled voxel.
    pub instances: Vec<(usize, u32)>,
}

pub fn encode_grid(grid: &BeliefGrid) -> Result<(Vec<u8>, GridSidecar)> {
    let d = grid.dims();
    for n in d.counts() {
        if n > u16::MAX as usize {
            return Err(Error::Format("grid too large for the binary format".into()));
        }
    }
    let mut runs: Vec<(u8, u32)> = Vec::new();
    for &c in grid.cells() {
        match runs.last_mut() {
            Some((code, len)) if *code == c as u8 && *len < u32::MAX => *len += 1,
            _ => runs.push((c as u8, 1)),
        }
    }
    let mut out = Vec::with_capacity(16 + runs.len() * 5);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for n in d.counts() {
        out.extend_from_slice(&(n as u16).to_le_bytes());
    }
    out.extend_from_slice(&(runs.len() as u32).to_le_bytes());
    for (code, len) in runs {
        out.push(code);
        out.extend_from_slice(&len.to_le_bytes());
    }
    let instances = (0..grid.len())
        .filter_map(|idx| grid.instance_id(idx).map(|id| (idx, id)))
        .collect();
    Ok((
        out,
        GridSidecar {
            resolution: d.resolution,
            origin: d.origin,
            instances,
        },
    ))
}

pub fn decode_grid(bytes: &[u8], sidecar: &GridSidecar) -> Result<BeliefGrid> {
    if bytes.len() < 16 || &bytes[0..4] != MAGIC {
        return Err(Error::Format("missing ANSV header".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported grid version {version}")));
    }
    let dims = GridDims::new(
        u16_at(6) as usize,
        u16_at(8) as usize,
        u16_at(10) as usize,
        sidecar.resolution,
        sidecar.origin,
    )?;
    let n_runs = u32_at(12) as usize;
    if bytes.len() != 16 + 5 * n_runs {
        return Err(Error::Format("run table length mismatch".into()));
    }
    let mut grid = BeliefGrid::unknown(dims);
    let mut idx = 0usize;
    for r in 0..n_runs {
        let o = 16 + 5 * r;
        let state = CellState::from_code(bytes[o]).ok_or_else(|| Error::Format(format!("bad cell code {}", bytes[o])))?;
        let len = u32_at(o + 1) as usize;
        if idx + len > dims.len() {
            return Err(Error::Format("runs overflow the grid".into()));
        }
        for i in idx..idx + len {
            grid.set(i, state, None);
        }
        idx += len;
    }
    if idx != dims.len() {
        return Err(Error::Format("runs do not cover the grid".into()));
    }
    for &(i, id) in &sidecar.instances {
        if i >= dims.len() || !grid.state(i).is_occupied() {
            return Err(Error::Format(format!("label on non-occupied voxel {i}")));
        }
        let s = grid.state(i);
        grid.set(i, s, Some(id));
    }
    Ok(grid)
}
