use crate::error::{Error, Result};
use crate::scene::BeliefGrid;

/// Fraction of voxels whose state is known. Predicted occupancy counts as
/// observed.
pub fn coverage(grid: &BeliefGrid) -> f64 {
    grid.observed_count() as f64 / grid.len() as f64
}

/// Fraction of the grid that was unknown in `prev` and is known in `next`.
///
/// Counts are integers until the final division, so
/// `coverage(prev) + coverage_gain(prev, next)` equals `coverage(next)` up
/// to a single rounding of each quotient.
pub fn coverage_gain(prev: &BeliefGrid, next: &BeliefGrid) -> Result<f64> {
    if !prev.dims().same_shape(next.dims()) {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            prev.dims().counts(),
            next.dims().counts()
        )));
    }
    let mut gained = 0usize;
    for (idx, (a, b)) in prev.cells().iter().zip(next.cells()).enumerate() {
        match (a.is_observed(), b.is_observed()) {
            (true, false) => return Err(Error::NonMonotone { index: idx }),
            (false, true) => gained += 1,
            _ => {}
        }
    }
    Ok(gained as f64 / prev.len() as f64)
}
