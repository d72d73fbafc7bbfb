use crate::scene::{coverage, BeliefGrid, CellState, Face};
use crate::sensor::{cast_skipping, chebyshev_field, CameraIntrinsics, Viewpoint};

/// Learning-free coverage estimate: current coverage plus the share of grid
/// voxels that are unknown and visible from `v` when unknown space is
/// treated as transparent.
///
/// Rays stop at occupied voxels and closed faces and are limited to the
/// carve range, since nothing farther can be labeled by one observation.
pub struct HeuristicGain<'a> {
    grid: &'a BeliefGrid,
    opening: Face,
    intr: CameraIntrinsics,
    coverage: f64,
    skip: Vec<u8>,
}

impl<'a> HeuristicGain<'a> {
    pub fn new(grid: &'a BeliefGrid, opening: Face, intr: &CameraIntrinsics) -> Self {
        let skip = chebyshev_field(grid.dims(), |i| grid.state(i) != CellState::Free);
        HeuristicGain {
            grid,
            opening,
            intr: *intr,
            coverage: coverage(grid),
            skip,
        }
    }

    /// Number of distinct unknown voxels the pixel rays of `v` reach.
    pub fn visible_unknown(&self, v: &Viewpoint) -> usize {
        let dims = self.grid.dims();
        let range = self.intr.carve_range(dims.resolution);
        let rot = v.orientation.to_rotation_matrix();
        let mut seen = vec![0u64; dims.len().div_ceil(64)];
        let mut count = 0usize;
        for row in 0..self.intr.height {
            for col in 0..self.intr.width {
                let dir = (rot * self.intr.pixel_ray(col, row)).normalize();
                cast_skipping(dims, self.opening, &v.position, &dir, range, Some(&self.skip), |idx, _| {
                    match self.grid.state(idx) {
                        CellState::Unknown => {
                            let (w, b) = (idx / 64, 1u64 << (idx % 64));
                            if seen[w] & b == 0 {
                                seen[w] |= b;
                                count += 1;
                            }
                            false
                        }
                        CellState::Free => false,
                        CellState::Seen | CellState::Predicted => true,
                    }
                });
            }
        }
        count
    }

    pub fn score(&self, v: &Viewpoint) -> f64 {
        let gain = self.visible_unknown(v) as f64 / self.grid.len() as f64;
        (self.coverage + gain).clamp(0.0, 1.0)
    }
}

/// One-shot form of [`HeuristicGain::score`].
pub fn heuristic_gain(grid: &BeliefGrid, opening: Face, v: &Viewpoint, intr: &CameraIntrinsics) -> f64 {
    HeuristicGain::new(grid, opening, intr).score(v)
}
