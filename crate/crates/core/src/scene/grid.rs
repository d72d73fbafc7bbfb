use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3};

/// One face of the scene box, named by its outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Face {
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-y")]
    NegY,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-z")]
    NegZ,
    #[serde(rename = "+z")]
    PosZ,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::NegX,
        Face::PosX,
        Face::NegY,
        Face::PosY,
        Face::NegZ,
        Face::PosZ,
    ];

    pub fn from_axis(axis: usize, positive: bool) -> Face {
        match (axis, positive) {
            (0, false) => Face::NegX,
            (0, true) => Face::PosX,
            (1, false) => Face::NegY,
            (1, true) => Face::PosY,
            (2, false) => Face::NegZ,
            _ => Face::PosZ,
        }
    }

    pub fn axis(self) -> usize {
        match self {
            Face::NegX | Face::PosX => 0,
            Face::NegY | Face::PosY => 1,
            Face::NegZ | Face::PosZ => 2,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Face::PosX | Face::PosY | Face::PosZ)
    }

    /// Outward unit normal as a signed axis value.
    pub fn sign(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            -1.0
        }
    }
}

impl std::str::FromStr for Face {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "-x" => Face::NegX,
            "+x" => Face::PosX,
            "-y" => Face::NegY,
            "+y" => Face::PosY,
            "-z" => Face::NegZ,
            "+z" => Face::PosZ,
            _ => return Err(Error::InvalidConfig(format!("unknown face {s:?}"))),
        })
    }
}

/// Voxel counts, edge length and world placement of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub resolution: f64,
    pub origin: Point3,
}

impl GridDims {
    pub fn new(nx: usize, ny: usize, nz: usize, resolution: f64, origin: Point3) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidConfig("voxel counts must be at least 1".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidConfig("resolution must be positive".into()));
        }
        Ok(GridDims {
            nx,
            ny,
            nz,
            resolution,
            origin,
        })
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        [i, j, k]
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.nx as f64 * self.resolution,
            self.ny as f64 * self.resolution,
            self.nz as f64 * self.resolution,
        ]
    }

    pub fn bounds(&self) -> Aabb {
        let e = self.extent();
        Aabb::new(
            self.origin,
            Point3::new(self.origin.x + e[0], self.origin.y + e[1], self.origin.z + e[2]),
        )
    }

    pub fn center(&self) -> Point3 {
        self.bounds().center()
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Point3 {
        let r = self.resolution;
        Point3::new(
            self.origin.x + (i as f64 + 0.5) * r,
            self.origin.y + (j as f64 + 0.5) * r,
            self.origin.z + (k as f64 + 0.5) * r,
        )
    }

    pub fn voxel_box(&self, i: usize, j: usize, k: usize) -> Aabb {
        let r = self.resolution;
        let min = Point3::new(
            self.origin.x + i as f64 * r,
            self.origin.y + j as f64 * r,
            self.origin.z + k as f64 * r,
        );
        Aabb::new(min, Point3::new(min.x + r, min.y + r, min.z + r))
    }

    /// Integer voxel coordinates of a world point, possibly outside the grid.
    pub fn voxel_of_unclamped(&self, p: &Point3) -> [i64; 3] {
        let r = self.resolution;
        [
            ((p.x - self.origin.x) / r).floor() as i64,
            ((p.y - self.origin.y) / r).floor() as i64,
            ((p.z - self.origin.z) / r).floor() as i64,
        ]
    }

    pub fn voxel_of(&self, p: &Point3) -> Option<[usize; 3]> {
        let v = self.voxel_of_unclamped(p);
        let n = self.counts();
        if (0..3).all(|a| v[a] >= 0 && (v[a] as usize) < n[a]) {
            Some([v[0] as usize, v[1] as usize, v[2] as usize])
        } else {
            None
        }
    }

    /// Voxel of a point clamped into the grid.
    pub fn voxel_of_clamped(&self, p: &Point3) -> [usize; 3] {
        let v = self.voxel_of_unclamped(p);
        let n = self.counts();
        let mut out = [0usize; 3];
        for a in 0..3 {
            out[a] = v[a].clamp(0, n[a] as i64 - 1) as usize;
        }
        out
    }

    pub fn same_shape(&self, other: &GridDims) -> bool {
        self.counts() == other.counts()
    }
}

/// State of one voxel in the belief.
///
/// `Seen` and `Predicted` are both occupied; they differ in whether the
/// occupancy came from a depth hit or from shape completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    Unknown = 0,
    Free = 1,
    Seen = 2,
    Predicted = 3,
}

impl CellState {
    #[inline]
    pub fn is_observed(self) -> bool {
        self != CellState::Unknown
    }

    #[inline]
    pub fn is_occupied(self) -> bool {
        matches!(self, CellState::Seen | CellState::Predicted)
    }

    pub fn from_code(code: u8) -> Option<CellState> {
        Some(match code {
            0 => CellState::Unknown,
            1 => CellState::Free,
            2 => CellState::Seen,
            3 => CellState::Predicted,
            _ => return None,
        })
    }
}

const NO_ID: u16 = u16::MAX;

/// Three-state voxel belief with per-voxel instance labels on occupied cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrid {
    dims: GridDims,
    cells: Vec<CellState>,
    ids: Vec<u16>,
}

impl BeliefGrid {
    /// A grid with every voxel unknown.
    pub fn unknown(dims: GridDims) -> Self {
        let n = dims.len();
        BeliefGrid {
            dims,
            cells: vec![CellState::Unknown; n],
            ids: vec![NO_ID; n],
        }
    }

    pub fn filled(dims: GridDims, state: CellState) -> Self {
        let mut g = Self::unknown(dims);
        g.cells.fill(state);
        g
    }

    pub fn dims(&self) -> &GridDims {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    #[inline]
    pub fn state(&self, idx: usize) -> CellState {
        self.cells[idx]
    }

    #[inline]
    pub fn state_at(&self, i: usize, j: usize, k: usize) -> CellState {
        self.cells[self.dims.index(i, j, k)]
    }

    pub fn instance_id(&self, idx: usize) -> Option<u32> {
        match self.ids[idx] {
            NO_ID => None,
            id => Some(id as u32),
        }
    }

    pub fn set_free(&mut self, idx: usize) {
        self.cells[idx] = CellState::Free;
        self.ids[idx] = NO_ID;
    }

    pub fn set_seen(&mut self, idx: usize, id: Option<u32>) {
        self.cells[idx] = CellState::Seen;
        self.ids[idx] = id.map_or(NO_ID, |v| v as u16);
    }

    pub fn set_predicted(&mut self, idx: usize, id: u32) {
        self.cells[idx] = CellState::Predicted;
        self.ids[idx] = id as u16;
    }

    /// Raw setter used by deserialization and test fixtures.
    pub fn set(&mut self, idx: usize, state: CellState, id: Option<u32>) {
        self.cells[idx] = state;
        self.ids[idx] = if state.is_occupied() {
            id.map_or(NO_ID, |v| v as u16)
        } else {
            NO_ID
        };
    }

    pub fn observed_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_observed()).count()
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// Checks the label invariants: ids only on occupied cells, every
    /// predicted cell labelled, and every label below `n_instances`.
    pub fn check_invariants(&self, n_instances: usize) -> Result<()> {
        for (idx, (&c, &id)) in self.cells.iter().zip(&self.ids).enumerate() {
            if !c.is_occupied() && id != NO_ID {
                return Err(Error::Format(format!("voxel {idx} has an id but is not occupied")));
            }
            if c == CellState::Predicted && id == NO_ID {
                return Err(Error::Format(format!("predicted voxel {idx} has no id")));
            }
            if id != NO_ID && id as usize >= n_instances {
                return Err(Error::Format(format!(
                    "voxel {idx} has label {id} but only {n_instances} instances exist"
                )));
            }
        }
        Ok(())
    }
}
