//! Voxel workspace, brick catalog and placement actions.
//!
//! Coordinates are 0-based: `x ∈ [0, H)`, `y ∈ [0, W)`, `z ∈ [0, D)` with
//! `z = 0` the layer resting on the base plate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed cell coordinate, used where a position may fall outside the grid.
pub type Pos = [i64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub h: usize,
    pub w: usize,
    pub d: usize,
}

impl Dims {
    pub fn new(h: usize, w: usize, d: usize) -> Result<Self> {
        if h == 0 || w == 0 || d == 0 {
            return Err(Error::InvalidConfig(format!("grid dims must be positive, got {h}x{w}x{d}")));
        }
        Ok(Dims { h, w, d })
    }

    pub fn cell_count(&self) -> usize {
        self.h * self.w * self.d
    }

    pub fn contains(&self, x: i64, y: i64, z: i64) -> bool {
        x >= 0 && y >= 0 && z >= 0 && (x as usize) < self.h && (y as usize) < self.w && (z as usize) < self.d
    }

    /// Linear cell index, layer-major so that one layer is a contiguous run.
    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        (c.z * self.h + c.x) * self.w + c.y
    }

    #[inline]
    pub fn cell(&self, index: usize) -> Cell {
        let y = index % self.w;
        let rest = index / self.w;
        Cell { x: rest % self.h, y, z: rest / self.h }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize, z: usize) -> Self {
        Cell { x, y, z }
    }

    pub fn pos(&self) -> Pos {
        [self.x as i64, self.y as i64, self.z as i64]
    }
}

/// Dense occupancy grid backed by a bitset.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VoxelGrid {
    dims: Dims,
    words: Vec<u64>,
}

impl fmt::Debug for VoxelGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VoxelGrid({}, {} occupied)", self.dims, self.count())
    }
}

impl VoxelGrid {
    pub fn empty(dims: Dims) -> Self {
        VoxelGrid { dims, words: vec![0; dims.cell_count().div_ceil(64)] }
    }

    pub fn full(dims: Dims) -> Self {
        let mut g = Self::empty(dims);
        for i in 0..dims.cell_count() {
            g.words[i / 64] |= 1 << (i % 64);
        }
        g
    }

    pub fn from_cells(dims: Dims, cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let mut g = Self::empty(dims);
        for c in cells {
            g.set(c, true)?;
        }
        Ok(g)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    fn check(&self, c: Cell) -> Result<usize> {
        if c.x < self.dims.h && c.y < self.dims.w && c.z < self.dims.d {
            Ok(self.dims.index(c))
        } else {
            Err(Error::OutOfBounds { cell: c.pos(), dims: self.dims })
        }
    }

    pub fn get(&self, c: Cell) -> Result<bool> {
        self.check(c).map(|i| self.bit(i))
    }

    /// Occupancy at a signed position; anything outside the grid reads as empty.
    pub fn occupied_at(&self, x: i64, y: i64, z: i64) -> bool {
        self.dims.contains(x, y, z) && self.bit(self.dims.index(Cell::new(x as usize, y as usize, z as usize)))
    }

    #[inline]
    pub(crate) fn bit(&self, index: usize) -> bool {
        self.words[index / 64] >> (index % 64) & 1 == 1
    }

    #[inline]
    pub(crate) fn set_bit(&mut self, index: usize, value: bool) {
        if value {
            self.words[index / 64] |= 1 << (index % 64);
        } else {
            self.words[index / 64] &= !(1 << (index % 64));
        }
    }

    pub fn set(&mut self, c: Cell, value: bool) -> Result<()> {
        let i = self.check(c)?;
        self.set_bit(i, value);
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(u64, u64) -> u64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimsMismatch(self.dims, other.dims));
        }
        let words = self.words.iter().zip(&other.words).map(|(&a, &b)| op(a, b)).collect();
        Ok(VoxelGrid { dims: self.dims, words })
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims == other.dims && self.words.iter().zip(&other.words).all(|(&a, &b)| a & !b == 0)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.dims.cell_count()).filter(|&i| self.bit(i)).map(|i| self.dims.cell(i))
    }

    /// Mirror about the plane `x = (H-1)/2`.
    pub fn mirror_x(&self) -> Self {
        let mut g = Self::empty(self.dims);
        for c in self.cells() {
            g.set_bit(self.dims.index(Cell::new(self.dims.h - 1 - c.x, c.y, c.z)), true);
        }
        g
    }

    /// Per-layer ASCII rendering, bottom layer first. `#` occupied, `.` empty.
    pub fn render_layers(&self) -> String {
        let mut out = String::new();
        for z in 0..self.dims.d {
            out.push_str(&format!("z={z}\n"));
            for x in 0..self.dims.h {
                for y in 0..self.dims.w {
                    out.push(if self.bit(self.dims.index(Cell::new(x, y, z))) { '#' } else { '.' });
                }
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrickType {
    pub id: usize,
    pub name: String,
    pub len_x: usize,
    pub len_y: usize,
    pub unit_weight: f64,
}

impl BrickType {
    /// Every brick is one layer tall.
    pub const HEIGHT: usize = 1;

    pub fn is_square(&self) -> bool {
        self.len_x == self.len_y
    }

    pub fn studs(&self) -> usize {
        self.len_x * self.len_y
    }

    pub fn weight(&self) -> f64 {
        self.unit_weight * self.studs() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrickCatalog {
    types: Vec<BrickType>,
}

pub const DEFAULT_BRICKS: [(usize, usize); 8] = [(1, 1), (1, 2), (1, 4), (1, 6), (1, 8), (2, 2), (2, 4), (2, 6)];

impl Default for BrickCatalog {
    fn default() -> Self {
        Self::from_footprints(&DEFAULT_BRICKS, 1.0).expect("default catalog is valid")
    }
}

impl BrickCatalog {
    pub fn from_footprints(footprints: &[(usize, usize)], unit_weight: f64) -> Result<Self> {
        if footprints.is_empty() {
            return Err(Error::InvalidConfig("brick catalog is empty".into()));
        }
        let mut types = Vec::with_capacity(footprints.len());
        for (id, &(lx, ly)) in footprints.iter().enumerate() {
            if lx == 0 || ly == 0 {
                return Err(Error::InvalidConfig(format!("brick {lx}x{ly} has a zero extent")));
            }
            types.push(BrickType { id, name: format!("{lx}x{ly}"), len_x: lx, len_y: ly, unit_weight });
        }
        Ok(BrickCatalog { types })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, id: usize) -> Result<&BrickType> {
        self.types.get(id).ok_or_else(|| Error::UnknownBrick(id.to_string()))
    }

    pub fn by_name(&self, name: &str) -> Result<&BrickType> {
        self.types.iter().find(|t| t.name == name).ok_or_else(|| Error::UnknownBrick(name.to_string()))
    }

    pub fn types(&self) -> &[BrickType] {
        &self.types
    }

    pub fn with_unit_weight(mut self, unit_weight: f64) -> Self {
        for t in &mut self.types {
            t.unit_weight = unit_weight;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum Orientation {
    /// Extent `len_x × len_y`.
    #[default]
    Landscape,
    /// Extent `len_y × len_x`.
    Portrait,
}

impl Orientation {
    pub fn as_u8(self) -> u8 {
        match self {
            Orientation::Landscape => 0,
            Orientation::Portrait => 1,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Orientation::Landscape),
            1 => Ok(Orientation::Portrait),
            _ => Err(Error::Malformed(format!("orientation must be 0 or 1, got {v}"))),
        }
    }
}

/// Place brick type `brick` with its minimum corner at `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub brick: usize,
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub orient: Orientation,
}

impl Action {
    pub fn new(brick: usize, x: usize, y: usize, z: usize, orient: Orientation) -> Self {
        Action { brick, x, y, z, orient }
    }

    /// Footprint extents `(ex, ey)` after applying the orientation.
    pub fn extents(&self, catalog: &BrickCatalog) -> Result<(usize, usize)> {
        let t = catalog.get(self.brick)?;
        Ok(match self.orient {
            Orientation::Landscape => (t.len_x, t.len_y),
            Orientation::Portrait => (t.len_y, t.len_x),
        })
    }

    /// The portrait twin of a square brick covers the same cells as its landscape form.
    pub fn is_redundant(&self, catalog: &BrickCatalog) -> bool {
        self.orient == Orientation::Portrait && catalog.get(self.brick).map(|t| t.is_square()).unwrap_or(false)
    }

    pub fn footprint(&self, catalog: &BrickCatalog, dims: Dims) -> Result<Footprint> {
        let (ex, ey) = self.extents(catalog)?;
        let fp = Footprint { x0: self.x, y0: self.y, z: self.z, ex, ey };
        match fp.cells().find(|c| c.x >= dims.h || c.y >= dims.w || c.z >= dims.d) {
            Some(c) => Err(Error::OutOfBounds { cell: c.pos(), dims }),
            None => Ok(fp),
        }
    }
}

/// Axis-aligned `ex × ey × 1` block of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Footprint {
    pub x0: usize,
    pub y0: usize,
    pub z: usize,
    pub ex: usize,
    pub ey: usize,
}

impl Footprint {
    pub fn len(&self) -> usize {
        self.ex * self.ey
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        let Footprint { x0, y0, z, ex, ey } = *self;
        (x0..x0 + ex).flat_map(move |x| (y0..y0 + ey).map(move |y| Cell { x, y, z }))
    }

    /// The same `(x, y)` extent shifted to layer `z`.
    pub fn at_layer(&self, z: usize) -> Footprint {
        Footprint { z, ..*self }
    }

    /// Count of occupied cells of `grid` inside this footprint.
    pub fn occupied_in(&self, grid: &VoxelGrid) -> usize {
        let dims = grid.dims();
        self.cells().filter(|&c| grid.bit(dims.index(c))).count()
    }

    pub fn to_grid(&self, dims: Dims) -> Result<VoxelGrid> {
        VoxelGrid::from_cells(dims, self.cells())
    }
}

/// Flat indexing of the `H·W·D·N·2` action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub dims: Dims,
    pub n_types: usize,
}

impl ActionSpace {
    pub fn new(dims: Dims, n_types: usize) -> Self {
        ActionSpace { dims, n_types }
    }

    pub fn size(&self) -> usize {
        self.dims.cell_count() * self.n_types * 2
    }

    pub fn index(&self, a: &Action) -> usize {
        let d = self.dims;
        ((((a.x * d.w + a.y) * d.d + a.z) * self.n_types + a.brick) * 2) + a.orient.as_u8() as usize
    }

    pub fn action(&self, index: usize) -> Action {
        let d = self.dims;
        let orient = if index % 2 == 0 { Orientation::Landscape } else { Orientation::Portrait };
        let mut rest = index / 2;
        let brick = rest % self.n_types;
        rest /= self.n_types;
        let z = rest % d.d;
        rest /= d.d;
        let y = rest % d.w;
        let x = rest / d.w;
        Action { brick, x, y, z, orient }
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        (0..self.size()).map(|i| self.action(i))
    }
}
