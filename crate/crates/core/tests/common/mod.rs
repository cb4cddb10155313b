//! Oracles and input generators shared by the integration tests. The
//! legality and PSOR oracles never call into the code they check.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use quadfd::grid::{Cell, DomainBox, QuadtreeGrid};
use quadfd::operators::{field, instantiate_builtin, NeumannHole, OperatorKind, OperatorSpec, ProblemDefinition};
use quadfd::solvers::{evolve, EvolveOptions};
use quadfd::stencil::Robin;
use quadfd::{Direction, GridFunction};
use rand::Rng;

/// Scale of the leaf covering each unit square, `[a][b]` with `a` along x.
pub struct UnitMap {
    pub size: u32,
    scale: Vec<Vec<u32>>,
}

impl UnitMap {
    /// `None` if the leaves do not tile the lattice exactly once.
    pub fn new(depth: u32, leaves: &[Cell]) -> Option<Self> {
        let size = 1u32 << depth;
        let mut scale = vec![vec![u32::MAX; size as usize]; size as usize];
        for c in leaves {
            let s = c.side();
            if c.i % s != 0 || c.j % s != 0 || c.i + s > size || c.j + s > size {
                return None;
            }
            for a in c.i..c.i + s {
                for b in c.j..c.j + s {
                    if scale[a as usize][b as usize] != u32::MAX {
                        return None;
                    }
                    scale[a as usize][b as usize] = c.scale;
                }
            }
        }
        if scale.iter().flatten().any(|&s| s == u32::MAX) {
            return None;
        }
        Some(UnitMap { size, scale })
    }

    pub fn at(&self, a: i64, b: i64) -> Option<u32> {
        if a < 0 || b < 0 || a >= self.size as i64 || b >= self.size as i64 {
            return None;
        }
        Some(self.scale[a as usize][b as usize])
    }

    /// Coarsest leaf scale over the unit squares `[a0, a1) x [b0, b1)`,
    /// or `None` if the rectangle leaves the lattice.
    pub fn coarsest(&self, a0: i64, a1: i64, b0: i64, b1: i64) -> Option<u32> {
        let mut m = 0;
        for a in a0..a1 {
            for b in b0..b1 {
                m = m.max(self.at(a, b)?);
            }
        }
        Some(m)
    }

    /// Scales of the leaves whose closure holds lattice point `(i, j)`.
    pub fn around(&self, i: u32, j: u32) -> Vec<u32> {
        let (i, j) = (i as i64, j as i64);
        [(i, j), (i - 1, j), (i, j - 1), (i - 1, j - 1)]
            .iter()
            .filter_map(|&(a, b)| self.at(a, b))
            .collect()
    }
}

/// How a lattice point sits among the leaves, derived from the leaves alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Incidence {
    NotANode,
    Wall,
    Regular,
    /// Hanging on a vertical edge (coarse cell east or west).
    HangingX,
    /// Hanging on a horizontal edge (coarse cell north or south).
    HangingY,
}

/// Classify `(i, j)` from the leaves incident to it.
pub fn incidence(leaves: &[Cell], depth: u32, i: u32, j: u32) -> Incidence {
    let n = 1u32 << depth;
    let incident: Vec<&Cell> = leaves.iter().filter(|c| c.contains(i, j)).collect();
    let corner_of = |c: &Cell| {
        let s = c.side();
        (i == c.i || i == c.i + s) && (j == c.j || j == c.j + s)
    };
    if !incident.iter().any(|c| corner_of(c)) {
        return Incidence::NotANode;
    }
    if i == 0 || j == 0 || i == n || j == n {
        return Incidence::Wall;
    }
    match incident.iter().find(|c| !corner_of(c)) {
        None => Incidence::Regular,
        Some(c) => {
            let s = c.side();
            if i == c.i || i == c.i + s {
                Incidence::HangingX
            } else {
                Incidence::HangingY
            }
        }
    }
}

/// Every violated structural rule of a leaf set, in words.
pub fn legality_violations(depth: u32, pads: (u32, u32), leaves: &[Cell]) -> Vec<String> {
    let mut out = Vec::new();
    let map = match UnitMap::new(depth, leaves) {
        Some(m) => m,
        None => return vec!["leaves do not tile the lattice".into()],
    };
    let n = map.size as i64;
    // 2:1 balance across every unit edge
    for a in 0..n {
        for b in 0..n {
            let s = map.at(a, b).unwrap();
            for (da, db) in [(1, 0), (0, 1)] {
                if let Some(t) = map.at(a + da, b + db) {
                    if s.abs_diff(t) > 1 {
                        out.push(format!("balance: scales {s} and {t} meet at unit ({a}, {b})"));
                    }
                }
            }
        }
    }
    // sibling rule: a leaf's siblings are all leaves or refined, i.e. the
    // parent region is covered by cells no coarser than the leaf
    for c in leaves {
        if c.scale < depth {
            let p = c.parent();
            let s = p.side() as i64;
            let m = map
                .coarsest(p.i as i64, p.i as i64 + s, p.j as i64, p.j as i64 + s)
                .unwrap();
            if m > c.scale {
                out.push(format!("sibling: {c:?} shares a parent with a coarser leaf"));
            }
        }
    }
    // padding around each hanging node, measured in cells of the coarse scale
    for c in leaves {
        let s = c.side() as i64;
        let (ci, cj) = (c.i as i64, c.j as i64);
        for (dir, (hi, hj)) in [(0, (ci + s, cj + s / 2)), (1, (ci, cj + s / 2)), (2, (ci + s / 2, cj + s)), (3, (ci + s / 2, cj))] {
            if c.scale == 0 || hi <= 0 || hj <= 0 || hi >= n || hj >= n {
                continue;
            }
            // a hanging node needs a finer leaf on the other side of the edge
            let finer = match dir {
                0 => map.at(hi, hj),
                1 => map.at(hi - 1, hj),
                2 => map.at(hi, hj),
                _ => map.at(hi, hj - 1),
            };
            if finer.is_none_or(|f| f >= c.scale) {
                continue;
            }
            let along_x = dir < 2;
            let pad = if along_x { pads.0 } else { pads.1 } as i64;
            let edge = if along_x { hi } else { hj };
            for t in 1..=pad {
                for (lo, hi_) in [(edge - t * s, edge - (t - 1) * s), (edge + (t - 1) * s, edge + t * s)] {
                    let m = if along_x {
                        map.coarsest(lo, hi_, cj, cj + s)
                    } else {
                        map.coarsest(ci, ci + s, lo, hi_)
                    };
                    if m.is_none_or(|m| m > c.scale) {
                        out.push(format!("padding: hanging node ({hi}, {hj}) of {c:?} lacks cell {t} at [{lo}, {hi_})"));
                    }
                }
            }
        }
    }
    out
}

/// Every leaf holding lattice point `(i, j)` has scale at most `k`.
pub fn honours_point(map: &UnitMap, i: u32, j: u32, k: u32) -> bool {
    map.around(i, j).iter().all(|&s| s <= k)
}

/// The region of `cell` is covered by leaves no coarser than it.
pub fn honours_cell(map: &UnitMap, cell: &Cell) -> bool {
    let s = cell.side() as i64;
    map.coarsest(cell.i as i64, cell.i as i64 + s, cell.j as i64, cell.j as i64 + s)
        .is_some_and(|m| m <= cell.scale)
}

/// Refinable cells of a depth-`depth` tree, numbered for bitmasks.
pub fn refinable_cells(depth: u32) -> Vec<Cell> {
    let mut out = Vec::new();
    for scale in (1..=depth).rev() {
        let s = 1u32 << scale;
        let m = 1u32 << (depth - scale);
        for a in 0..m {
            for b in 0..m {
                out.push(Cell::new(a * s, b * s, scale));
            }
        }
    }
    out
}

pub fn leaves_of_mask(depth: u32, cells: &[Cell], mask: u32) -> Vec<Cell> {
    let refined: HashSet<Cell> = cells
        .iter()
        .enumerate()
        .filter(|(k, _)| mask >> k & 1 == 1)
        .map(|(_, c)| *c)
        .collect();
    let root = Cell::new(0, 0, depth);
    if !refined.contains(&root) {
        return vec![root];
    }
    refined
        .iter()
        .flat_map(|c| {
            let h = c.side() / 2;
            let k = c.scale - 1;
            [
                Cell::new(c.i, c.j, k),
                Cell::new(c.i + h, c.j, k),
                Cell::new(c.i, c.j + h, k),
                Cell::new(c.i + h, c.j + h, k),
            ]
        })
        .filter(|c| !refined.contains(c))
        .collect()
}

/// All refined sets closed under "refined implies parent refined".
pub fn all_trees(depth: u32) -> Vec<u32> {
    let cells = refinable_cells(depth);
    let index: HashMap<Cell, usize> = cells.iter().enumerate().map(|(k, c)| (*c, k)).collect();
    fn grow(c: Cell, index: &HashMap<Cell, usize>) -> Vec<u32> {
        let mut out = vec![0];
        if c.scale == 0 {
            return out;
        }
        let h = c.side() / 2;
        let k = c.scale - 1;
        let kids = [
            Cell::new(c.i, c.j, k),
            Cell::new(c.i + h, c.j, k),
            Cell::new(c.i, c.j + h, k),
            Cell::new(c.i + h, c.j + h, k),
        ];
        let mut combos = vec![1u32 << index[&c]];
        for kid in kids {
            let sub = grow(kid, index);
            combos = combos.iter().flat_map(|m| sub.iter().map(move |s| m | s)).collect();
        }
        out.extend(combos);
        out
    }
    grow(Cell::new(0, 0, depth), &index)
}

pub fn mask_of(grid: &QuadtreeGrid, cells: &[Cell]) -> u32 {
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| grid.is_refined(c))
        .map(|(k, _)| 1u32 << k)
        .sum()
}

/// Random lattice requests `(i, j, k)` with scales in `0..=depth`.
pub fn random_requests(rng: &mut impl Rng, depth: u32, count: usize) -> Vec<(u32, u32, u32)> {
    let n = 1u32 << depth;
    (0..count)
        .map(|_| (rng.random_range(0..=n), rng.random_range(0..=n), rng.random_range(0..=depth)))
        .collect()
}

/// A random balanced grid on `domain`, usually with hanging nodes.
pub fn random_grid(rng: &mut impl Rng, domain: DomainBox, depth: u32) -> QuadtreeGrid {
    let count = rng.random_range(1..4);
    let reqs = random_requests(rng, depth, count);
    QuadtreeGrid::build_lattice(domain, depth, domain.default_pads(), &reqs, &[]).unwrap()
}

/// Projected SOR for `min(-Δu - f, u - g) = 0` on a uniform
/// `(2^level + 1)^2` node array over `domain`, `u = g` on the walls.
/// Returns `u[a][b]` with `a` along x.
pub fn psor_obstacle(
    domain: DomainBox,
    level: u32,
    f: impl Fn(f64, f64) -> f64,
    g: impl Fn(f64, f64) -> f64,
    tol: f64,
) -> Vec<Vec<f64>> {
    let m = (1usize << level) + 1;
    let hx = domain.width() / (m - 1) as f64;
    let hy = domain.height() / (m - 1) as f64;
    let pos = |a: usize, b: usize| (domain.x_min + a as f64 * hx, domain.y_min + b as f64 * hy);
    let mut u = vec![vec![0.0; m]; m];
    let mut gv = vec![vec![0.0; m]; m];
    let mut fv = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..m {
            let (x, y) = pos(a, b);
            gv[a][b] = g(x, y);
            fv[a][b] = f(x, y);
            u[a][b] = gv[a][b];
        }
    }
    let (cx, cy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let diag = 2.0 * (cx + cy);
    let omega = 1.8;
    for _ in 0..1_000_000 {
        let mut change: f64 = 0.0;
        for a in 1..m - 1 {
            for b in 1..m - 1 {
                let gs = (cx * (u[a + 1][b] + u[a - 1][b]) + cy * (u[a][b + 1] + u[a][b - 1]) + fv[a][b]) / diag;
                let next = (u[a][b] + omega * (gs - u[a][b])).max(gv[a][b]);
                change = change.max((next - u[a][b]).abs());
                u[a][b] = next;
            }
        }
        if change < tol {
            return u;
        }
    }
    panic!("PSOR did not converge");
}

/// Least squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn random_box(rng: &mut impl Rng) -> DomainBox {
    let x0 = rng.random_range(-2.0..1.0);
    let y0 = rng.random_range(-2.0..1.0);
    let w = rng.random_range(0.5..3.0);
    let h = w * [0.5, 1.0, 2.0][rng.random_range(0..3)];
    DomainBox::new(x0, x0 + w, y0, y0 + h).unwrap()
}

/// One of the builtins on `grid`, with data that exercises every node type.
pub fn random_operator(rng: &mut impl Rng, grid: &QuadtreeGrid) -> OperatorSpec {
    let pick = rng.random_range(0..6);
    operator_variant(rng, grid, pick)
}

/// Variant `pick` of [`random_operator`]: 0 Poisson, 1 to 3 `bc_composite`
/// with an indicator, Robin walls and a Neumann hole, 4 obstacle, 5 Stefan.
pub fn operator_variant(rng: &mut impl Rng, grid: &QuadtreeGrid, pick: usize) -> OperatorSpec {
    let d = *grid.domain();
    let (cx, cy) = (d.x_min + 0.5 * d.width(), d.y_min + 0.5 * d.height());
    let r = 0.3 * d.width().min(d.height());
    let a: f64 = rng.random_range(-2.0..2.0);
    let src = field(move |x, y| a * (x - y).sin());
    let dat = field(move |x, y| (a * x).cos() + y);
    let (kind, p) = match pick {
        0 => (OperatorKind::PoissonDirichlet, ProblemDefinition::new(src, dat)),
        1 => (
            OperatorKind::BcComposite,
            ProblemDefinition::new(src, dat).with_indicator(move |x, y| (x - cx).hypot(y - cy) < r),
        ),
        2 => (
            OperatorKind::BcComposite,
            ProblemDefinition::new(src, dat).with_boundary(|dir, _, _| match dir {
                Direction::East | Direction::North => Robin { a: 1.0, b: 2.0, c: 0.5 },
                _ => Robin::neumann(0.25),
            }),
        ),
        3 => (
            OperatorKind::BcComposite,
            ProblemDefinition::new(src, dat).with_hole(NeumannHole {
                cx,
                cy,
                radius: r,
                flux: 1.0,
            }),
        ),
        4 => (OperatorKind::Obstacle, ProblemDefinition::new(src, dat)),
        _ => (OperatorKind::Stefan, ProblemDefinition::new(field(|_, _| 0.0), dat)),
    };
    instantiate_builtin(kind, &p, grid).unwrap()
}

pub fn random_state(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(-1.0..1.0) })
        .collect()
}

/// Zero crossing along the middle row of a slab held at 1 on the west
/// wall and started at -1 everywhere else, sampled at `times`. The
/// equation is invariant under `x -> kx, t -> k²t`, so the crossing
/// moves like `√t` once it spans a few cells.
pub fn stefan_slab_fronts(depth: u32, width: f64, times: &[f64]) -> Vec<f64> {
    let p = ProblemDefinition::new(field(|_, _| 0.0), field(|_, _| -1.0)).with_boundary(|d, _, _| match d {
        Direction::West => Robin::dirichlet(1.0),
        Direction::East => Robin::dirichlet(-1.0),
        _ => Robin::neumann(0.0),
    });
    let grid = QuadtreeGrid::uniform(DomainBox::new(0.0, width, 0.0, 1.0).unwrap(), depth, depth).unwrap();
    let u0 = GridFunction::from_fn(&grid, |x, _| if x == 0.0 { 1.0 } else { -1.0 });
    let factory = |g: &QuadtreeGrid| instantiate_builtin(OperatorKind::Stefan, &p, g);
    let out = evolve(&factory, &grid, &u0, *times.last().unwrap(), None, times, &EvolveOptions::default()).unwrap();
    let mid = 1u32 << (depth - 1);
    out.snapshots
        .iter()
        .map(|s| {
            let row: Vec<(f64, f64)> = (0..=1u32 << depth)
                .map(|i| {
                    let k = grid.node_at(i, mid).unwrap();
                    (grid.node(k).x, s.u[k])
                })
                .collect();
            let w = row.windows(2).find(|w| w[0].1 > 0.0 && w[1].1 <= 0.0).unwrap();
            w[0].0 + w[0].1 / (w[0].1 - w[1].1) * (w[1].0 - w[0].0)
        })
        .collect()
}
