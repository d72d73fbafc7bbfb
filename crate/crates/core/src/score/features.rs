use serde::{Deserialize, Serialize};

use crate::scene::{BeliefGrid, CellState, GridDims};
use crate::sensor::Viewpoint;

/// Coarse pooling of a belief grid into a fixed number of blocks per axis.
///
/// Each block reports the fraction of its voxels that are unknown, free and
/// occupied, so grids of any size map to `blocks[0] * blocks[1] * blocks[2] * 3`
/// features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub blocks: [usize; 3],
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec { blocks: [5, 8, 4] }
    }
}

/// Inputs describing a viewpoint: position relative to the grid center in
/// half-extents, the grid extent in meters and the orientation with `w >= 0`.
pub const VIEW_FEATURES: usize = 10;

impl FeatureSpec {
    pub fn len(&self) -> usize {
        self.blocks.iter().product::<usize>() * 3
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn featurize(&self, grid: &BeliefGrid) -> Vec<f64> {
        let dims = grid.dims();
        let n = dims.counts();
        let b = self.blocks;
        let block_of = |a: usize, i: usize| i * b[a] / n[a];
        let mut counts = vec![[0u32; 3]; b[0] * b[1] * b[2]];
        let mut sizes = vec![0u32; counts.len()];
        for k in 0..n[2] {
            let bk = block_of(2, k);
            for j in 0..n[1] {
                let bj = block_of(1, j);
                for i in 0..n[0] {
                    let bi = block_of(0, i);
                    let blk = bi + b[0] * (bj + b[1] * bk);
                    let ch = match grid.state_at(i, j, k) {
                        CellState::Unknown => 0,
                        CellState::Free => 1,
                        CellState::Seen | CellState::Predicted => 2,
                    };
                    counts[blk][ch] += 1;
                    sizes[blk] += 1;
                }
            }
        }
        let mut out = Vec::with_capacity(self.len());
        for (c, s) in counts.iter().zip(&sizes) {
            let s = (*s).max(1) as f64;
            out.extend(c.iter().map(|&v| v as f64 / s));
        }
        out
    }
}

pub fn view_features(dims: &GridDims, v: &Viewpoint) -> [f64; VIEW_FEATURES] {
    let c = dims.center();
    let e = dims.extent();
    let q = v.canonical().orientation.into_inner();
    [
        (v.position.x - c.x) / (e[0] / 2.0),
        (v.position.y - c.y) / (e[1] / 2.0),
        (v.position.z - c.z) / (e[2] / 2.0),
        e[0],
        e[1],
        e[2],
        q.w,
        q.i,
        q.j,
        q.k,
    ]
}
