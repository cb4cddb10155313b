use super::{
    Cell, DanglingInfo, Direction, EquidistantPair, GridNode, Neighbor, NodeClass, QuadtreeGrid,
    VirtualIndex,
};
use crate::error::{Error, Result};

// quadrant offsets in doubled coordinates: NE, NW, SW, SE
const QUADS: [(i64, i64); 4] = [(1, 1), (-1, 1), (-1, -1), (1, -1)];
const NE: usize = 0;
const NW: usize = 1;
const SW: usize = 2;
const SE: usize = 3;

/// Lattice distance from a point to the far side of a cell along one ray.
type Reach = fn(&Cell, &VirtualIndex) -> i64;

/// Classify every lattice point in `corners` (sorted by `(j, i)`) and fill in
/// neighbor topology.
pub fn classify_nodes(grid: &QuadtreeGrid, corners: &[VirtualIndex]) -> Result<Vec<GridNode>> {
    let n = grid.lattice_size();
    let (ux, uy) = grid.unit();
    let mut out = Vec::with_capacity(corners.len());
    for (id, p) in corners.iter().enumerate() {
        let (qi, qj) = (2 * p.i as i64, 2 * p.j as i64);
        let quads: [Option<Cell>; 4] =
            QUADS.map(|(a, b)| grid.leaf_containing_doubled(qi + a, qj + b));
        let is_corner = |q: usize| quads[q].map(|c| c.has_corner(p.i, p.j));

        let mut walls = Vec::new();
        if p.i == n {
            walls.push(Direction::East);
        }
        if p.i == 0 {
            walls.push(Direction::West);
        }
        if p.j == n {
            walls.push(Direction::North);
        }
        if p.j == 0 {
            walls.push(Direction::South);
        }

        let mut missing = None;
        if walls.is_empty() && !(0..4).all(|q| is_corner(q) == Some(true)) {
            let same = |a: usize, b: usize| quads[a].is_some() && quads[a] == quads[b];
            missing = if same(NE, SE) && is_corner(NE) == Some(false) {
                Some(Direction::East)
            } else if same(NW, SW) && is_corner(NW) == Some(false) {
                Some(Direction::West)
            } else if same(NE, NW) && is_corner(NE) == Some(false) {
                Some(Direction::North)
            } else if same(SW, SE) && is_corner(SW) == Some(false) {
                Some(Direction::South)
            } else {
                return Err(Error::Invariant(format!(
                    "lattice point ({}, {}) is neither regular nor a hanging node",
                    p.i, p.j
                )));
            };
        }
        let class = if !walls.is_empty() {
            NodeClass::Boundary
        } else {
            match missing {
                None => NodeClass::Regular,
                Some(d) if d.is_x() => NodeClass::DanglingX,
                Some(_) => NodeClass::DanglingY,
            }
        };

        // lattice distance along each ray to the nearest node
        let ray = |dir: Direction| -> Option<u32> {
            if Some(dir) == missing {
                return None;
            }
            let (adj, reach): ([usize; 2], Reach) = match dir {
                Direction::East => ([NE, SE], |c, p| (c.i + c.side()) as i64 - p.i as i64),
                Direction::West => ([NW, SW], |c, p| p.i as i64 - c.i as i64),
                Direction::North => ([NE, NW], |c, p| (c.j + c.side()) as i64 - p.j as i64),
                Direction::South => ([SE, SW], |c, p| p.j as i64 - c.j as i64),
            };
            adj.iter()
                .filter_map(|&q| quads[q].map(|c| reach(&c, p)))
                .filter(|d| *d > 0)
                .min()
                .map(|d| d as u32)
        };

        let mut neighbors = [None; 4];
        for dir in Direction::ALL {
            if let Some(d) = ray(dir) {
                let (di, dj) = dir.step();
                let node = grid
                    .node_at_signed(p.i as i64 + di * d as i64, p.j as i64 + dj * d as i64)
                    .ok_or_else(|| {
                        Error::Invariant(format!("missing neighbor of ({}, {})", p.i, p.j))
                    })?;
                let unit = if dir.is_x() { ux } else { uy };
                neighbors[dir.slot()] = Some(Neighbor {
                    node,
                    dist: d as f64 * unit,
                    lattice: d,
                });
            }
        }

        let pair = |plus: Direction, minus: Direction, unit: f64| -> Option<EquidistantPair> {
            let a = neighbors[plus.slot()]?;
            let b = neighbors[minus.slot()]?;
            let (di, dj) = plus.step();
            let mut d = a.lattice.min(b.lattice);
            while d <= n {
                let fwd = grid.node_at_signed(p.i as i64 + di * d as i64, p.j as i64 + dj * d as i64);
                let back = grid.node_at_signed(p.i as i64 - di * d as i64, p.j as i64 - dj * d as i64);
                if let (Some(f), Some(bk)) = (fwd, back) {
                    return Some(EquidistantPair {
                        plus: f,
                        minus: bk,
                        dist: d as f64 * unit,
                        lattice: d,
                    });
                }
                d *= 2;
            }
            None
        };
        let (pair_x, pair_y) = if missing.is_some() {
            (None, None)
        } else {
            (
                pair(Direction::East, Direction::West, ux),
                pair(Direction::North, Direction::South, uy),
            )
        };
        if class == NodeClass::Regular && (pair_x.is_none() || pair_y.is_none()) {
            return Err(Error::Invariant(format!(
                "regular node ({}, {}) lacks an equidistant pair",
                p.i, p.j
            )));
        }

        let dangling = match missing {
            None => None,
            Some(dir) => {
                let coarse = match dir {
                    Direction::East => quads[NE],
                    Direction::West => quads[NW],
                    Direction::North => quads[NE],
                    Direction::South => quads[SW],
                }
                .expect("coarse quadrant present");
                let k = coarse.scale;
                let full = 1i64 << k;
                let half = full / 2;
                let (di, dj) = dir.step();
                let (ci, cj) = (p.i as i64 + di * full, p.j as i64 + dj * full);
                let (a, b) = if dir.is_x() {
                    ((ci, cj - half), (ci, cj + half))
                } else {
                    ((ci - half, cj), (ci + half, cj))
                };
                let lookup = |(x, y): (i64, i64)| {
                    grid.node_at_signed(x, y).ok_or_else(|| {
                        Error::Invariant(format!("coarse vertex ({x}, {y}) missing"))
                    })
                };
                Some(DanglingInfo {
                    missing: dir,
                    coarse_scale: k,
                    far_pair: [lookup(a)?, lookup(b)?],
                    far_dist: full as f64 * if dir.is_x() { ux } else { uy },
                })
            }
        };

        let (x, y) = grid.position(p.i, p.j);
        debug_assert_eq!(grid.node_at(p.i, p.j), Some(id));
        out.push(GridNode {
            index: *p,
            x,
            y,
            class,
            neighbors,
            pair_x,
            pair_y,
            dangling,
            walls,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use crate::grid::{build_quadtree, DomainBox, NodeClass, QuadtreeGrid, ScaleRequest};

    #[test]
    fn uniform_interior_nodes_are_regular_with_equal_arms() {
        let g = QuadtreeGrid::uniform(DomainBox::unit(), 4, 3).unwrap();
        let h = 1.0 / 8.0;
        for n in g.nodes() {
            if n.walls.is_empty() {
                assert_eq!(n.class, NodeClass::Regular);
                for nb in n.neighbors.iter() {
                    assert!((nb.unwrap().dist - h).abs() < 1e-15);
                }
            } else {
                assert_eq!(n.class, NodeClass::Boundary);
            }
        }
    }

    #[test]
    fn hanging_nodes_sit_on_coarse_fine_edges() {
        // refine the lower-left quarter of a 2x2 grid
        let g = build_quadtree(
            DomainBox::unit(),
            3,
            (1, 1),
            &[ScaleRequest::new(0.25, 0.25, 1)],
        )
        .unwrap();
        let hanging: Vec<(u32, u32)> = g
            .nodes()
            .iter()
            .filter(|n| n.dangling.is_some())
            .map(|n| (n.index.i, n.index.j))
            .collect();
        // edges of the refined quarter shared with unrefined quarters
        assert_eq!(hanging, vec![(4, 2), (2, 4)]);
        let n = g.node(g.node_at(4, 2).unwrap());
        assert_eq!(n.class, NodeClass::DanglingX);
        let d = n.dangling.unwrap();
        assert_eq!(d.missing, crate::grid::Direction::East);
        assert_eq!(d.coarse_scale, 2);
    }
}

