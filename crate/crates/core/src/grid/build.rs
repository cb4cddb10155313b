use std::collections::HashSet;

use super::{snap_to_lattice, Cell, DomainBox, QuadtreeGrid, ScaleRequest, MAX_DEPTH};
use crate::error::{Error, Result};

/// Build the least balanced, padded quadtree honoring `requests`.
///
/// Each request `(x, y, k)` snaps to the nearest lattice point `p`; every
/// cell whose closure contains `p` must end up with scale at most `k`, so
/// `p` is a node whose neighbors all lie within `2^k` lattice units.
pub fn build_quadtree(
    domain: DomainBox,
    depth: u32,
    pads: (u32, u32),
    requests: &[ScaleRequest],
) -> Result<QuadtreeGrid> {
    QuadtreeGrid::build(domain, depth, pads, requests, &[])
}

impl QuadtreeGrid {
    /// As [`build_quadtree`], additionally requiring every cell in `cells`
    /// to be present (as a leaf or refined).
    pub fn build(
        domain: DomainBox,
        depth: u32,
        pads: (u32, u32),
        requests: &[ScaleRequest],
        cells: &[Cell],
    ) -> Result<QuadtreeGrid> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::Input(format!("depth {depth} outside 1..={MAX_DEPTH}")));
        }
        if pads.0 == 0 || pads.1 == 0 {
            return Err(Error::Input("padding must be at least 1".into()));
        }
        let mut b = Builder::new(depth, pads);
        for r in requests {
            if !domain.contains(r.x, r.y) {
                return Err(Error::OutsideDomain { x: r.x, y: r.y });
            }
            if r.scale > depth {
                return Err(Error::ScaleTooLarge {
                    scale: r.scale,
                    depth,
                });
            }
            let p = snap_to_lattice(&domain, depth, r.x, r.y);
            b.request_point(p.i, p.j, r.scale);
        }
        for c in cells {
            if c.scale > depth || c.i % c.side() != 0 || c.j % c.side() != 0 {
                return Err(Error::Input(format!("malformed cell {c:?}")));
            }
            if c.i + c.side() > b.size || c.j + c.side() > b.size {
                return Err(Error::Input(format!("cell {c:?} outside lattice")));
            }
            b.require_exists(*c);
        }
        b.close();
        loop {
            let extra = b.padding_violations();
            if extra.is_empty() {
                break;
            }
            for c in extra {
                b.require_refined(c);
            }
            b.close();
        }
        QuadtreeGrid::from_refined(domain, depth, pads, b.refined, b.ops)
    }

    /// Build from lattice-point requests `(i, j, k)` (no snapping).
    pub fn build_lattice(
        domain: DomainBox,
        depth: u32,
        pads: (u32, u32),
        points: &[(u32, u32, u32)],
        cells: &[Cell],
    ) -> Result<QuadtreeGrid> {
        let reqs: Vec<ScaleRequest> = points
            .iter()
            .map(|&(i, j, k)| {
                let n = (1u64 << depth) as f64;
                ScaleRequest::new(
                    domain.x_min + domain.width() * i as f64 / n,
                    domain.y_min + domain.height() * j as f64 / n,
                    k,
                )
            })
            .collect();
        QuadtreeGrid::build(domain, depth, pads, &reqs, cells)
    }

    /// Uniform grid with leaves of scale `depth - level` (a `2^level` grid of cells).
    pub fn uniform(domain: DomainBox, depth: u32, level: u32) -> Result<QuadtreeGrid> {
        if level > depth {
            return Err(Error::ScaleTooLarge {
                scale: level,
                depth,
            });
        }
        let scale = depth - level;
        let n = 1u32 << level;
        let side = 1u32 << scale;
        let cells: Vec<Cell> = (0..n)
            .flat_map(|a| (0..n).map(move |b| Cell::new(a * side, b * side, scale)))
            .collect();
        QuadtreeGrid::build(domain, depth, domain.default_pads(), &[], &cells)
    }
}

struct Builder {
    depth: u32,
    size: u32,
    pad_x: u32,
    pad_y: u32,
    refined: HashSet<Cell>,
    work: Vec<Cell>,
    ops: u64,
}

impl Builder {
    fn new(depth: u32, pads: (u32, u32)) -> Self {
        Builder {
            depth,
            size: 1 << depth,
            pad_x: pads.0,
            pad_y: pads.1,
            refined: HashSet::new(),
            work: Vec::new(),
            ops: 0,
        }
    }

    fn require_refined(&mut self, c: Cell) {
        self.ops += 1;
        if c.scale == 0 {
            return;
        }
        if self.refined.insert(c) {
            self.work.push(c);
        }
    }

    fn require_exists(&mut self, c: Cell) {
        if c.scale < self.depth {
            self.require_refined(c.parent());
        }
    }

    /// Cells at scale `k + 1` whose closure holds the point; refining them
    /// (and, through closure, their ancestors) forces scale `<= k` around it.
    fn request_point(&mut self, i: u32, j: u32, k: u32) {
        if k >= self.depth {
            return;
        }
        let s = 1u32 << (k + 1);
        for ci in self.spans(i, s) {
            for cj in self.spans(j, s) {
                self.require_refined(Cell::new(ci, cj, k + 1));
            }
        }
    }

    fn spans(&self, x: u32, s: u32) -> Vec<u32> {
        let base = (x / s * s).min(self.size - s);
        let mut out = vec![base];
        if x.is_multiple_of(s) && x >= s && x - s != base {
            out.push(x - s);
        }
        out
    }

    fn same_scale_neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let s = c.side() as i64;
        let max = (self.size - c.side()) as i64;
        [(s, 0), (-s, 0), (0, s), (0, -s)]
            .into_iter()
            .filter_map(move |(di, dj)| {
                let (ni, nj) = (c.i as i64 + di, c.j as i64 + dj);
                (ni >= 0 && nj >= 0 && ni <= max && nj <= max)
                    .then(|| Cell::new(ni as u32, nj as u32, c.scale))
            })
    }

    /// Close under the tree rule (refined => parent refined) and the balance
    /// rule (refined => every same-size edge neighbor exists).
    fn close(&mut self) {
        while let Some(c) = self.work.pop() {
            self.ops += 1;
            self.require_exists(c);
            let nbs: Vec<Cell> = self.same_scale_neighbors(c).collect();
            for nb in nbs {
                self.require_exists(nb);
            }
        }
    }

    fn exists(&self, c: &Cell) -> bool {
        c.scale == self.depth || self.refined.contains(&c.parent())
    }

    /// Cells that must be refined so every dangling node sees `pad` cells of
    /// the coarse scale on both sides along its axis. When the padding run
    /// would leave the lattice, the coarse cell itself is split instead,
    /// which pushes the hanging node toward the wall until it disappears.
    fn padding_violations(&mut self) -> Vec<Cell> {
        let mut out = Vec::new();
        let leaves: Vec<Cell> = if self.refined.is_empty() {
            return out;
        } else {
            self.refined
                .iter()
                .flat_map(|c| c.children())
                .filter(|c| !self.refined.contains(c))
                .collect()
        };
        for leaf in leaves {
            self.ops += 1;
            let s = leaf.side() as i64;
            let max = (self.size - leaf.side()) as i64;
            for (di, dj) in [(s, 0i64), (-s, 0), (0, s), (0, -s)] {
                let (ni, nj) = (leaf.i as i64 + di, leaf.j as i64 + dj);
                if ni < 0 || nj < 0 || ni > max || nj > max {
                    continue;
                }
                let nb = Cell::new(ni as u32, nj as u32, leaf.scale);
                if !self.refined.contains(&nb) {
                    continue;
                }
                // hanging node on the shared edge; the padding row runs along
                // the axis perpendicular to that edge
                let along_x = di != 0;
                let pad = if along_x { self.pad_x } else { self.pad_y } as i64;
                if pad <= 1 {
                    continue;
                }
                let (edge, fixed) = if along_x {
                    ((leaf.i as i64).max(ni), leaf.j)
                } else {
                    ((leaf.j as i64).max(nj), leaf.i)
                };
                let mut truncated = false;
                let mut missing = Vec::new();
                for t in -pad..pad {
                    let start = edge + t * s;
                    if start < 0 || start > max {
                        truncated = true;
                        break;
                    }
                    let c = if along_x {
                        Cell::new(start as u32, fixed, leaf.scale)
                    } else {
                        Cell::new(fixed, start as u32, leaf.scale)
                    };
                    if !self.exists(&c) {
                        missing.push(c.parent());
                    }
                }
                if truncated {
                    out.push(leaf);
                } else {
                    out.extend(missing);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}
