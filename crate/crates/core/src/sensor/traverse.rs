use crate::geometry::{Point3, Vector3};
use crate::scene::{Face, GridDims};

/// How a ray cast through the scene box ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayEnd {
    /// Stopped inside voxel `idx`, entered at distance `t`.
    Hit { t: f64, idx: usize },
    /// Struck a closed face of the box at distance `t`.
    Wall { t: f64 },
    /// Left through the opening, missed the box, or ran out of range.
    Escaped,
}

/// Walks the voxels pierced by `origin + t * dir` for `t` in `[0, t_max]`
/// in order of entry (Amanatides–Woo).
///
/// `dir` must be unit length. `visit(idx, t_enter)` is called for each voxel;
/// returning `true` stops the walk with a hit. All faces of the box except
/// `opening` are opaque from both sides.
pub fn cast<F>(dims: &GridDims, opening: Face, origin: &Point3, dir: &Vector3, t_max: f64, visit: F) -> RayEnd
where
    F: FnMut(usize, f64) -> bool,
{
    cast_skipping(dims, opening, origin, dir, t_max, None, visit)
}

/// [`cast`] that jumps across empty space using a [`chebyshev_field`].
///
/// Voxels inside a skipped cube are not visited, so the field must be zero
/// on every voxel for which `visit` could return `true`.
pub fn cast_skipping<F>(
    dims: &GridDims,
    opening: Face,
    origin: &Point3,
    dir: &Vector3,
    t_max: f64,
    skip: Option<&[u8]>,
    mut visit: F,
) -> RayEnd
where
    F: FnMut(usize, f64) -> bool,
{
    let n = dims.counts();
    let n_i = [n[0] as i64, n[1] as i64, n[2] as i64];
    let b = dims.bounds();
    let inside = (0..3).all(|a| origin[a] >= b.min[a] && origin[a] < b.max[a]);

    let (mut v, mut t) = if inside {
        let c = dims.voxel_of_clamped(origin);
        ([c[0] as i64, c[1] as i64, c[2] as i64], 0.0)
    } else {
        // Slab entry.
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        let mut near_axis = 0;
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < b.min[a] || origin[a] >= b.max[a] {
                    return RayEnd::Escaped;
                }
                continue;
            }
            let t0 = (b.min[a] - origin[a]) / dir[a];
            let t1 = (b.max[a] - origin[a]) / dir[a];
            let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
            if lo > t_near {
                t_near = lo;
                near_axis = a;
            }
            t_far = t_far.min(hi);
        }
        if t_near > t_far || t_far <= 0.0 || t_near < 0.0 || t_near > t_max {
            return RayEnd::Escaped;
        }
        let entry = Face::from_axis(near_axis, dir[near_axis] < 0.0);
        if entry != opening {
            return RayEnd::Wall { t: t_near };
        }
        let p = origin + dir * t_near;
        let c = dims.voxel_of_unclamped(&p);
        let mut v = [0i64; 3];
        for a in 0..3 {
            v[a] = c[a].clamp(0, n_i[a] - 1);
        }
        v[near_axis] = if dir[near_axis] > 0.0 { 0 } else { n_i[near_axis] - 1 };
        (v, t_near)
    };

    let step: [i64; 3] = [sgn(dir.x), sgn(dir.y), sgn(dir.z)];
    let r = dims.resolution;
    // Work in voxel units: origin `pv`, `t` per voxel `tscale`.
    let mut pv = [0.0; 3];
    let mut tscale = [f64::INFINITY; 3];
    let mut dv = [0.0; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        pv[a] = (origin[a] - dims.origin[a]) / r;
        dv[a] = dir[a] / r;
        if step[a] != 0 {
            tscale[a] = r / dir[a];
            t_delta[a] = tscale[a].abs();
        }
    }
    let boundary = |a: usize, k: i64| (k as f64 - pv[a]) * tscale[a];
    let init_next = |v: &[i64; 3]| {
        let mut next = [f64::INFINITY; 3];
        for a in 0..3 {
            if step[a] != 0 {
                next[a] = boundary(a, v[a] + i64::from(step[a] > 0));
            }
        }
        next
    };
    let mut next = init_next(&v);
    loop {
        let idx = dims.index(v[0] as usize, v[1] as usize, v[2] as usize);
        let k = skip.map_or(0, |s| s[idx] as i64);
        let axis;
        if k >= 2 {
            // Leave the empty cube of radius k - 1 around `v` in one jump.
            let mut lo = [0i64; 3];
            let mut hi = [0i64; 3];
            for a in 0..3 {
                lo[a] = (v[a] - (k - 1)).max(0);
                hi[a] = (v[a] + (k - 1)).min(n_i[a] - 1);
            }
            let mut best = f64::INFINITY;
            let mut ax = 0;
            for a in 0..3 {
                if step[a] == 0 {
                    continue;
                }
                let tb = if step[a] > 0 { boundary(a, hi[a] + 1) } else { boundary(a, lo[a]) };
                if tb < best {
                    best = tb;
                    ax = a;
                }
            }
            if !(best <= t_max) {
                return RayEnd::Escaped;
            }
            t = best.max(t);
            for a in 0..3 {
                // Truncation equals floor here: negatives clamp to `lo >= 0` either way.
                v[a] = ((pv[a] + dv[a] * t) as i64).clamp(lo[a], hi[a]);
            }
            v[ax] = if step[ax] > 0 { hi[ax] + 1 } else { lo[ax] - 1 };
            axis = ax;
            if v[axis] >= 0 && v[axis] < n_i[axis] {
                next = init_next(&v);
            }
        } else {
            if visit(idx, t) {
                return RayEnd::Hit { t, idx };
            }
            let mut ax = 0;
            if next[1] < next[ax] {
                ax = 1;
            }
            if next[2] < next[ax] {
                ax = 2;
            }
            if !(next[ax] <= t_max) {
                return RayEnd::Escaped;
            }
            t = next[ax].max(t);
            next[ax] += t_delta[ax];
            v[ax] += step[ax];
            axis = ax;
        }
        if v[axis] < 0 || v[axis] >= n_i[axis] {
            let face = Face::from_axis(axis, step[axis] > 0);
            return if face == opening { RayEnd::Escaped } else { RayEnd::Wall { t } };
        }
    }
}

/// Chessboard distance, in voxels, from each voxel to the nearest voxel
/// where `is_stop` holds (0 on those voxels), saturating at 255. Space
/// outside the grid counts as empty.
pub fn chebyshev_field(dims: &GridDims, is_stop: impl Fn(usize) -> bool) -> Vec<u8> {
    let [nx, ny, nz] = dims.counts();
    let mut d: Vec<u8> = (0..dims.len()).map(|i| if is_stop(i) { 0 } else { 255 }).collect();
    let sweep = |d: &mut Vec<u8>, forward: bool| {
        let s: i64 = if forward { -1 } else { 1 };
        let ks: Vec<usize> = if forward { (0..nz).collect() } else { (0..nz).rev().collect() };
        let js: Vec<usize> = if forward { (0..ny).collect() } else { (0..ny).rev().collect() };
        let is: Vec<usize> = if forward { (0..nx).collect() } else { (0..nx).rev().collect() };
        for &k in &ks {
            for &j in &js {
                for &i in &is {
                    let idx = dims.index(i, j, k);
                    let mut best = d[idx];
                    if best == 0 {
                        continue;
                    }
                    // The 13 neighbours already visited in this sweep order.
                    for (di, dj, dk) in CAUSAL {
                        let (ii, jj, kk) = (i as i64 + di * s, j as i64 + dj * s, k as i64 + dk * s);
                        if ii < 0 || jj < 0 || kk < 0 || ii >= nx as i64 || jj >= ny as i64 || kk >= nz as i64 {
                            continue;
                        }
                        let nd = d[dims.index(ii as usize, jj as usize, kk as usize)].saturating_add(1);
                        best = best.min(nd);
                    }
                    d[idx] = best;
                }
            }
        }
    };
    sweep(&mut d, true);
    sweep(&mut d, false);
    d
}

/// Offsets `(di, dj, dk)` scaled by -1 give the neighbours preceding a voxel
/// in raster order.
const CAUSAL: [(i64, i64, i64); 13] = [
    (1, 0, 0),
    (-1, 1, 0),
    (0, 1, 0),
    (1, 1, 0),
    (-1, -1, 1),
    (0, -1, 1),
    (1, -1, 1),
    (-1, 0, 1),
    (0, 0, 1),
    (1, 0, 1),
    (-1, 1, 1),
    (0, 1, 1),
    (1, 1, 1),
];

#[inline]
fn sgn(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> GridDims {
        GridDims::new(4, 4, 4, 0.25, Point3::origin()).unwrap()
    }

    #[test]
    fn enters_through_opening_and_hits_back_wall() {
        let d = dims();
        let o = Point3::new(-1.0, 0.6, 0.6);
        let mut seen = vec![];
        let end = cast(&d, Face::NegX, &o, &Vector3::x(), 10.0, |i, _| {
            seen.push(i);
            false
        });
        assert_eq!(seen.len(), 4);
        match end {
            RayEnd::Wall { t } => assert!((t - 2.0).abs() < 1e-12),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn closed_face_blocks_from_outside() {
        let d = dims();
        let o = Point3::new(2.0, 0.6, 0.6);
        let end = cast(&d, Face::NegX, &o, &-Vector3::x(), 10.0, |_, _| false);
        assert_eq!(end, RayEnd::Wall { t: 1.0 });
    }

    #[test]
    fn exits_through_opening() {
        let d = dims();
        let o = Point3::new(0.6, 0.6, 0.6);
        let end = cast(&d, Face::NegX, &o, &-Vector3::x(), 10.0, |_, _| false);
        assert_eq!(end, RayEnd::Escaped);
    }

    #[test]
    fn stops_on_occupied_voxel() {
        let d = dims();
        let target = d.index(2, 2, 2);
        let o = Point3::new(-0.5, 0.6, 0.6);
        let end = cast(&d, Face::NegX, &o, &Vector3::x(), 10.0, |i, _| i == target);
        match end {
            RayEnd::Hit { t, idx } => {
                assert_eq!(idx, target);
                assert!((t - 1.0).abs() < 1e-12);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn range_limit() {
        let d = dims();
        let o = Point3::new(-1.0, 0.6, 0.6);
        assert_eq!(cast(&d, Face::NegX, &o, &Vector3::x(), 0.5, |_, _| true), RayEnd::Escaped);
    }
}
