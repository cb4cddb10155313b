//! Adaptive quadtree grids over a virtual `(2^N+1) x (2^N+1)` lattice.
//!
//! A grid is described by the set of *refined* cells. Every refined cell is
//! split into four children; cells that exist but are not refined are the
//! leaves. Leaf corners are the grid nodes. Construction enforces
//!
//! * 2:1 balance between edge-adjacent leaves,
//! * scale padding around dangling nodes (room for the widened I-stencil),
//! * the caller's scale requests and required cells.
//!
//! A finished [`QuadtreeGrid`] is immutable.

mod build;
mod classify;
mod dump;
mod scattered;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use crate::error::{Error, Result};

pub use build::build_quadtree;
pub use classify::classify_nodes;
pub use dump::{parse_grid_dump, write_grid_dump, GridDump};
pub use scattered::init_from_scattered;

/// Deepest lattice supported; keeps every index in `u32` with room to spare.
pub const MAX_DEPTH: u32 = 24;

static NEXT_GENERATION: AtomicU64 = AtomicU64::new(1);

pub(crate) fn next_generation() -> u64 {
    NEXT_GENERATION.fetch_add(1, AtomicOrdering::Relaxed)
}

/// A point of the virtual ultra-fine lattice. Ordered by `(j, i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VirtualIndex {
    pub i: u32,
    pub j: u32,
}

impl VirtualIndex {
    pub fn new(i: u32, j: u32) -> Self {
        VirtualIndex { i, j }
    }
}

impl Ord for VirtualIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.j, self.i).cmp(&(other.j, other.i))
    }
}

impl PartialOrd for VirtualIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Physical extent of the root cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl DomainBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let ok = x_min.is_finite() && x_max.is_finite() && y_min.is_finite() && y_max.is_finite();
        if !ok || x_max <= x_min || y_max <= y_min {
            return Err(Error::InvalidDomain(format!(
                "[{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(DomainBox {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn unit() -> Self {
        DomainBox {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        }
    }

    /// Square box of side `side` centred at the origin.
    pub fn centered_square(side: f64) -> Result<Self> {
        DomainBox::new(-side / 2.0, side / 2.0, -side / 2.0, side / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Minimal padding that makes the widened I-stencil monotone:
    /// `pad_x = ceil(L_y / 2 L_x)`, `pad_y = ceil(L_x / 2 L_y)`.
    pub fn default_pads(&self) -> (u32, u32) {
        let px = (self.height() / (2.0 * self.width())).ceil().max(1.0) as u32;
        let py = (self.width() / (2.0 * self.height())).ceil().max(1.0) as u32;
        (px, py)
    }
}

/// "Somewhere near `(x, y)` the grid must be at least as fine as scale `k`."
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleRequest {
    pub x: f64,
    pub y: f64,
    pub scale: u32,
}

impl ScaleRequest {
    pub fn new(x: f64, y: f64, scale: u32) -> Self {
        ScaleRequest { x, y, scale }
    }
}

/// A quadtree cell: lower-left corner on the lattice plus scale `k`
/// (side `2^k` lattice units). Ordered by `(j, i, scale)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub j: u32,
    pub i: u32,
    pub scale: u32,
}

impl Cell {
    pub fn new(i: u32, j: u32, scale: u32) -> Self {
        Cell { i, j, scale }
    }

    pub fn side(&self) -> u32 {
        1 << self.scale
    }

    pub fn parent(&self) -> Cell {
        let s = self.side() << 1;
        Cell::new(self.i / s * s, self.j / s * s, self.scale + 1)
    }

    pub fn children(&self) -> [Cell; 4] {
        debug_assert!(self.scale > 0);
        let h = self.side() >> 1;
        let k = self.scale - 1;
        [
            Cell::new(self.i, self.j, k),
            Cell::new(self.i + h, self.j, k),
            Cell::new(self.i, self.j + h, k),
            Cell::new(self.i + h, self.j + h, k),
        ]
    }

    /// Closed containment of a lattice point.
    pub fn contains(&self, i: u32, j: u32) -> bool {
        let s = self.side();
        i >= self.i && i <= self.i + s && j >= self.j && j <= self.j + s
    }

    pub fn has_corner(&self, i: u32, j: u32) -> bool {
        let s = self.side();
        (i == self.i || i == self.i + s) && (j == self.j || j == self.j + s)
    }

    pub fn corners(&self) -> [VirtualIndex; 4] {
        let s = self.side();
        [
            VirtualIndex::new(self.i, self.j),
            VirtualIndex::new(self.i + s, self.j),
            VirtualIndex::new(self.i, self.j + s),
            VirtualIndex::new(self.i + s, self.j + s),
        ]
    }
}

/// Axis directions, in the order used by [`GridNode::neighbors`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    East,
    West,
    North,
    South,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::East,
        Direction::West,
        Direction::North,
        Direction::South,
    ];

    pub fn slot(self) -> usize {
        match self {
            Direction::East => 0,
            Direction::West => 1,
            Direction::North => 2,
            Direction::South => 3,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::East => Direction::West,
            Direction::West => Direction::East,
            Direction::North => Direction::South,
            Direction::South => Direction::North,
        }
    }

    pub fn is_x(self) -> bool {
        matches!(self, Direction::East | Direction::West)
    }

    /// Unit lattice step `(di, dj)`.
    pub fn step(self) -> (i64, i64) {
        match self {
            Direction::East => (1, 0),
            Direction::West => (-1, 0),
            Direction::North => (0, 1),
            Direction::South => (0, -1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Regular,
    /// Hanging node on a vertical edge; the missing neighbor is in x.
    DanglingX,
    /// Hanging node on a horizontal edge; the missing neighbor is in y.
    DanglingY,
    Boundary,
}

impl NodeClass {
    pub fn label(self) -> &'static str {
        match self {
            NodeClass::Regular => "regular",
            NodeClass::DanglingX => "dangling-x",
            NodeClass::DanglingY => "dangling-y",
            NodeClass::Boundary => "boundary",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Some(match s {
            "regular" => NodeClass::Regular,
            "dangling-x" => NodeClass::DanglingX,
            "dangling-y" => NodeClass::DanglingY,
            "boundary" => NodeClass::Boundary,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    /// Physical distance.
    pub dist: f64,
    /// Lattice distance.
    pub lattice: u32,
}

/// Nearest pair of equidistant opposing nodes along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquidistantPair {
    /// Node in the positive direction (east or north).
    pub plus: usize,
    /// Node in the negative direction (west or south).
    pub minus: usize,
    pub dist: f64,
    pub lattice: u32,
}

/// Extra topology carried by a hanging node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DanglingInfo {
    /// Side on which the coarse cell lies (no direct neighbor there).
    pub missing: Direction,
    /// Scale of the coarse cell whose edge the node bisects.
    pub coarse_scale: u32,
    /// The two far vertices of the coarse cell, directly across the node.
    pub far_pair: [usize; 2],
    /// Physical distance to the far edge (the coarse cell's width across).
    pub far_dist: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridNode {
    pub index: VirtualIndex,
    pub x: f64,
    pub y: f64,
    pub class: NodeClass,
    /// Nearest neighbors along E, W, N, S (see [`Direction::slot`]).
    pub neighbors: [Option<Neighbor>; 4],
    pub pair_x: Option<EquidistantPair>,
    pub pair_y: Option<EquidistantPair>,
    pub dangling: Option<DanglingInfo>,
    /// Domain walls the node lies on.
    pub walls: Vec<Direction>,
}

impl GridNode {
    pub fn neighbor(&self, dir: Direction) -> Option<Neighbor> {
        self.neighbors[dir.slot()]
    }

    /// Smallest physical distance to any direct neighbor.
    pub fn nearest_distance(&self) -> f64 {
        self.neighbors
            .iter()
            .flatten()
            .map(|n| n.dist)
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest lattice distance to any direct neighbor.
    pub fn nearest_lattice(&self) -> u32 {
        self.neighbors
            .iter()
            .flatten()
            .map(|n| n.lattice)
            .min()
            .unwrap_or(u32::MAX)
    }
}

/// Balanced quadtree grid.
#[derive(Clone, Debug)]
pub struct QuadtreeGrid {
    depth: u32,
    domain: DomainBox,
    pad_x: u32,
    pad_y: u32,
    refined: HashSet<Cell>,
    leaves: Vec<Cell>,
    nodes: Vec<GridNode>,
    lookup: BTreeMap<VirtualIndex, usize>,
    generation: u64,
    construction_ops: u64,
}

impl QuadtreeGrid {
    /// Assemble a grid from a refined-cell set that already satisfies the
    /// structural invariants.
    pub(crate) fn from_refined(
        domain: DomainBox,
        depth: u32,
        pads: (u32, u32),
        refined: HashSet<Cell>,
        construction_ops: u64,
    ) -> Result<Self> {
        let root = Cell::new(0, 0, depth);
        let mut leaves: Vec<Cell> = if refined.is_empty() {
            vec![root]
        } else {
            refined
                .iter()
                .flat_map(|c| c.children())
                .filter(|c| !refined.contains(c))
                .collect()
        };
        leaves.sort();
        let mut corners: Vec<VirtualIndex> = leaves.iter().flat_map(|c| c.corners()).collect();
        corners.sort();
        corners.dedup();
        let lookup: BTreeMap<VirtualIndex, usize> =
            corners.iter().enumerate().map(|(n, v)| (*v, n)).collect();
        let mut grid = QuadtreeGrid {
            depth,
            domain,
            pad_x: pads.0,
            pad_y: pads.1,
            refined,
            leaves,
            nodes: Vec::new(),
            lookup,
            generation: next_generation(),
            construction_ops,
        };
        grid.nodes = classify_nodes(&grid, &corners)?;
        Ok(grid)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn pads(&self) -> (u32, u32) {
        (self.pad_x, self.pad_y)
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Number of list operations spent during construction.
    pub fn construction_ops(&self) -> u64 {
        self.construction_ops
    }

    /// Lattice points per side minus one.
    pub fn lattice_size(&self) -> u32 {
        1 << self.depth
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &GridNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> &[Cell] {
        &self.leaves
    }

    pub fn refined_cells(&self) -> &HashSet<Cell> {
        &self.refined
    }

    pub fn is_refined(&self, cell: &Cell) -> bool {
        self.refined.contains(cell)
    }

    /// Whether `cell` is a node of the tree (leaf or refined).
    pub fn cell_exists(&self, cell: &Cell) -> bool {
        cell.scale == self.depth || self.refined.contains(&cell.parent())
    }

    pub fn node_at(&self, i: u32, j: u32) -> Option<usize> {
        self.lookup.get(&VirtualIndex::new(i, j)).copied()
    }

    pub(crate) fn node_at_signed(&self, i: i64, j: i64) -> Option<usize> {
        if i < 0 || j < 0 || i > self.lattice_size() as i64 || j > self.lattice_size() as i64 {
            return None;
        }
        self.node_at(i as u32, j as u32)
    }

    /// Physical size of one lattice step in x and y.
    pub fn unit(&self) -> (f64, f64) {
        let n = self.lattice_size() as f64;
        (self.domain.width() / n, self.domain.height() / n)
    }

    pub fn position(&self, i: u32, j: u32) -> (f64, f64) {
        let (ux, uy) = self.unit();
        (
            self.domain.x_min + i as f64 * ux,
            self.domain.y_min + j as f64 * uy,
        )
    }

    /// Nearest lattice point; exact halves round toward the origin.
    pub fn snap(&self, x: f64, y: f64) -> Result<VirtualIndex> {
        if !self.domain.contains(x, y) {
            return Err(Error::OutsideDomain { x, y });
        }
        Ok(snap_to_lattice(&self.domain, self.depth, x, y))
    }

    /// Leaf whose interior contains the point given in doubled lattice
    /// coordinates (odd values sit strictly inside a unit cell).
    pub(crate) fn leaf_containing_doubled(&self, qx: i64, qy: i64) -> Option<Cell> {
        let n2 = 2 * self.lattice_size() as i64;
        if qx <= 0 || qy <= 0 || qx >= n2 || qy >= n2 {
            return None;
        }
        let mut c = Cell::new(0, 0, self.depth);
        while self.refined.contains(&c) {
            let h = (c.side() >> 1) as i64;
            let ci = c.i as i64 + if qx > 2 * (c.i as i64 + h) { h } else { 0 };
            let cj = c.j as i64 + if qy > 2 * (c.j as i64 + h) { h } else { 0 };
            c = Cell::new(ci as u32, cj as u32, c.scale - 1);
        }
        Some(c)
    }

    /// Smallest leaf whose closure contains lattice point `(i, j)`.
    pub fn smallest_leaf_at(&self, i: u32, j: u32) -> Option<Cell> {
        let (qi, qj) = (2 * i as i64, 2 * j as i64);
        [(1, 1), (-1, 1), (-1, -1), (1, -1)]
            .iter()
            .filter_map(|(a, b)| self.leaf_containing_doubled(qi + a, qj + b))
            .min_by_key(|c| c.scale)
    }

    /// Leaf containing a physical point (ties go to the smallest candidate).
    pub fn leaf_at_point(&self, x: f64, y: f64) -> Option<Cell> {
        if !self.domain.contains(x, y) {
            return None;
        }
        let (ux, uy) = self.unit();
        let n = self.lattice_size() as f64;
        let fx = ((x - self.domain.x_min) / ux).clamp(0.0, n);
        let fy = ((y - self.domain.y_min) / uy).clamp(0.0, n);
        // doubled coordinates, nudged to an odd value inside the nearest unit cell
        let qx = ((fx.floor().min(n - 1.0)) as i64) * 2 + 1;
        let qy = ((fy.floor().min(n - 1.0)) as i64) * 2 + 1;
        self.leaf_containing_doubled(qx, qy)
    }

    /// Physical extent of a cell as `(x0, y0, x1, y1)`.
    pub fn cell_rect(&self, cell: &Cell) -> (f64, f64, f64, f64) {
        let (x0, y0) = self.position(cell.i, cell.j);
        let (x1, y1) = self.position(cell.i + cell.side(), cell.j + cell.side());
        (x0, y0, x1, y1)
    }

    /// Scale of the finest leaf.
    pub fn finest_scale(&self) -> u32 {
        self.leaves.iter().map(|c| c.scale).min().unwrap_or(self.depth)
    }

    /// Scale of the coarsest leaf.
    pub fn coarsest_scale(&self) -> u32 {
        self.leaves.iter().map(|c| c.scale).max().unwrap_or(self.depth)
    }

    /// Whether two grids have the same cell structure.
    pub fn same_cells(&self, other: &QuadtreeGrid) -> bool {
        self.depth == other.depth && self.refined == other.refined
    }

    /// Whether every leaf of `other` is a cell (leaf or refined) of `self`.
    pub fn contains_grid(&self, other: &QuadtreeGrid) -> bool {
        self.depth == other.depth && other.leaves.iter().all(|c| self.cell_exists(c))
    }

    /// Request list reproducing this grid (one cell requirement per leaf).
    pub fn leaf_cells(&self) -> Vec<Cell> {
        self.leaves.clone()
    }
}

pub(crate) fn snap_coordinate(t: f64) -> u32 {
    let f = t.floor();
    let frac = t - f;
    if frac > 0.5 {
        f as u32 + 1
    } else {
        f as u32
    }
}

pub(crate) fn snap_to_lattice(domain: &DomainBox, depth: u32, x: f64, y: f64) -> VirtualIndex {
    let n = (1u64 << depth) as f64;
    let tx = ((x - domain.x_min) / domain.width() * n).clamp(0.0, n);
    let ty = ((y - domain.y_min) / domain.height() * n).clamp(0.0, n);
    VirtualIndex::new(snap_coordinate(tx), snap_coordinate(ty))
}
