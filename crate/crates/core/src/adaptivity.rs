//! Refinement criteria, scale requests, regridding and solution transfer.

use std::fmt;

use crate::error::Result;
use crate::function::GridFunction;
use crate::grid::{Cell, Direction, QuadtreeGrid, ScaleRequest};
use crate::operators::{Field, OperatorSpec};
use crate::stencil::one_sided;

/// Nonnegative per-node refinement indicator.
#[derive(Clone)]
pub enum Criterion {
    /// `|F[u]|`
    OperatorResidual,
    /// `min(|Δ_h u|, |u - g|)`
    ObstacleTerms,
    /// `min(|Δ_h u|, |Du|²)`
    StefanTerms,
    /// Distance to the nearest target point.
    Distance(Vec<(f64, f64)>),
    /// Steepest one-sided slope `max |u_j - u_i| / Δ_j`.
    Slope,
    /// `inner / (1 + dist / length)` with `dist` a distance function.
    Proximity {
        inner: Box<Criterion>,
        distance: Field,
        length: f64,
    },
}

impl fmt::Debug for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::OperatorResidual => f.write_str("OperatorResidual"),
            Criterion::ObstacleTerms => f.write_str("ObstacleTerms"),
            Criterion::StefanTerms => f.write_str("StefanTerms"),
            Criterion::Distance(t) => f.debug_tuple("Distance").field(t).finish(),
            Criterion::Slope => f.write_str("Slope"),
            Criterion::Proximity { inner, length, .. } => f
                .debug_struct("Proximity")
                .field("inner", inner)
                .field("length", length)
                .finish_non_exhaustive(),
        }
    }
}

/// How criterion values turn into scales.
#[derive(Clone, Debug, PartialEq)]
pub enum ScaleRule {
    /// Nondecreasing `t_1 <= ... <= t_K`. A value above `t_k` (largest such
    /// `k`) asks for the `(K - k + 1)`-th finest scale, so `t_K` maps to
    /// the finest scale.
    Thresholds(Vec<f64>),
    /// `(radius, scale)`: a value at most `radius` asks for `scale`. Used
    /// with distance criteria; the targets themselves are requested at the
    /// finest band scale.
    Bands(Vec<(f64, u32)>),
}

#[derive(Clone, Debug)]
pub struct RefinementPolicy {
    pub criterion: Criterion,
    pub rule: ScaleRule,
    /// Scale of the finest cells the policy may ask for.
    pub finest_scale: u32,
    /// Extra padding, in cells of the requested scale.
    pub padding: u32,
    /// Leaves of the fixed initial quadtree.
    pub initial: Vec<Cell>,
}

impl RefinementPolicy {
    pub fn new(criterion: Criterion, rule: ScaleRule, finest_scale: u32) -> Self {
        RefinementPolicy {
            criterion,
            rule,
            finest_scale,
            padding: 0,
            initial: Vec::new(),
        }
    }

    pub fn with_padding(mut self, padding: u32) -> Self {
        self.padding = padding;
        self
    }

    pub fn with_initial(mut self, grid: &QuadtreeGrid) -> Self {
        self.initial = grid.leaf_cells();
        self
    }

    /// Scale asked for by a criterion value, if any.
    pub fn scale_for(&self, value: f64) -> Option<u32> {
        match &self.rule {
            ScaleRule::Thresholds(t) => {
                let k = t.iter().rposition(|&tk| value > tk)?;
                Some(self.finest_scale + (t.len() - 1 - k) as u32)
            }
            ScaleRule::Bands(b) => b
                .iter()
                .filter(|(r, _)| value <= *r)
                .map(|&(_, s)| s)
                .min(),
        }
    }
}

fn node_value(c: &Criterion, op: &OperatorSpec, grid: &QuadtreeGrid, u: &[f64], i: usize) -> f64 {
    let n = grid.node(i);
    match c {
        Criterion::OperatorResidual => op.residual_at(i, u).abs(),
        Criterion::ObstacleTerms => match (op.row_at(i), op.datum_at(i)) {
            (Some(row), Some(g)) => row.eval(u).abs().min((u[i] - g).abs()),
            _ => 0.0,
        },
        Criterion::StefanTerms => match (op.row_at(i), op.gradient_at(i)) {
            (Some(row), Some(grad)) => row.eval(u).abs().min(grad.value(u)),
            _ => 0.0,
        },
        Criterion::Distance(targets) => targets
            .iter()
            .map(|&(x, y)| (n.x - x).hypot(n.y - y))
            .fold(f64::INFINITY, f64::min),
        Criterion::Slope => Direction::ALL
            .iter()
            .filter_map(|&d| one_sided(grid, i, d))
            .map(|s| s.slope(u, u[i]).abs())
            .fold(0.0, f64::max),
        Criterion::Proximity {
            inner,
            distance,
            length,
        } => node_value(inner, op, grid, u, i) / (1.0 + distance(n.x, n.y).abs() / length),
    }
}

/// Criterion values on the current grid; inactive nodes get 0, except for
/// purely geometric criteria which are evaluated everywhere.
pub fn evaluate_criteria(
    policy: &RefinementPolicy,
    op: &OperatorSpec,
    grid: &QuadtreeGrid,
    u: &GridFunction,
) -> Result<GridFunction> {
    op.check(grid)?;
    u.check(grid)?;
    let geometric = matches!(policy.criterion, Criterion::Distance(_));
    let v = u.values();
    let vals = (0..grid.len())
        .map(|i| {
            if geometric || op.is_active(i) {
                node_value(&policy.criterion, op, grid, v, i)
            } else {
                0.0
            }
        })
        .collect();
    GridFunction::new(grid, vals)
}

/// Input to [`regrid`]: point requests plus cells that must exist.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Refinement {
    pub points: Vec<ScaleRequest>,
    pub cells: Vec<Cell>,
}

/// Scale requests implied by `values`, never finer than `limit`.
///
/// Every request is dilated by the policy's padding and the result always
/// carries the initial-quadtree leaves as required cells.
pub fn compute_refinement(
    policy: &RefinementPolicy,
    values: &GridFunction,
    grid: &QuadtreeGrid,
    limit: u32,
) -> Refinement {
    let n = grid.lattice_size() as i64;
    let pad = policy.padding as i64;
    let mut out = Vec::new();
    let mut push = |i: u32, j: u32, s: u32| {
        let s = s.max(limit).min(grid.depth());
        let step = 1i64 << s;
        for a in -pad..=pad {
            for b in -pad..=pad {
                let qi = (i as i64 + a * step).clamp(0, n);
                let qj = (j as i64 + b * step).clamp(0, n);
                let (x, y) = grid.position(qi as u32, qj as u32);
                out.push(ScaleRequest::new(x, y, s));
            }
        }
    };
    for (node, &v) in grid.nodes().iter().zip(values.values()) {
        if let Some(s) = policy.scale_for(v) {
            push(node.index.i, node.index.j, s);
        }
    }
    if let (Criterion::Distance(targets), ScaleRule::Bands(b)) = (&policy.criterion, &policy.rule) {
        if let Some(s) = b.iter().map(|t| t.1).min() {
            for &(x, y) in targets {
                if let Ok(p) = grid.snap(x, y) {
                    push(p.i, p.j, s);
                }
            }
        }
    }
    Refinement {
        points: out,
        cells: policy.initial.clone(),
    }
}

/// Rebuild from `refinement` and transfer `u`.
///
/// Surviving nodes keep their values bit for bit; new nodes take the
/// bilinear interpolant from the smallest old leaf containing them.
pub fn regrid(
    grid: &QuadtreeGrid,
    u: &GridFunction,
    refinement: &Refinement,
) -> Result<(QuadtreeGrid, GridFunction)> {
    u.check(grid)?;
    let next = QuadtreeGrid::build(
        *grid.domain(),
        grid.depth(),
        grid.pads(),
        &refinement.points,
        &refinement.cells,
    )?;
    let v = transfer(grid, u, &next)?;
    Ok((next, v))
}

/// `grid` with every leaf coarser than `limit` split once.
pub fn probe_grid(grid: &QuadtreeGrid, limit: u32) -> Result<QuadtreeGrid> {
    let mut cells = Vec::with_capacity(grid.leaves().len() * 4);
    for c in grid.leaves() {
        if c.scale > limit {
            cells.extend(c.children());
        } else {
            cells.push(*c);
        }
    }
    QuadtreeGrid::build(*grid.domain(), grid.depth(), grid.pads(), &[], &cells)
}

/// Interpolate `u` from `from` onto the nodes of `to`.
pub fn transfer(from: &QuadtreeGrid, u: &GridFunction, to: &QuadtreeGrid) -> Result<GridFunction> {
    u.check(from)?;
    let vals = to
        .nodes()
        .iter()
        .map(|n| match from.node_at(n.index.i, n.index.j) {
            Some(k) => u[k],
            None => interpolate_lattice(from, u, n.index.i, n.index.j),
        })
        .collect();
    GridFunction::new(to, vals)
}

fn bilinear(grid: &QuadtreeGrid, u: &GridFunction, c: &Cell, fx: f64, fy: f64) -> f64 {
    let s = c.side();
    let at = |i: u32, j: u32| grid.node_at(i, j).map(|k| u[k]).unwrap_or(f64::NAN);
    let (a, b) = (fx.clamp(0.0, 1.0), fy.clamp(0.0, 1.0));
    let v00 = at(c.i, c.j);
    let v10 = at(c.i + s, c.j);
    let v01 = at(c.i, c.j + s);
    let v11 = at(c.i + s, c.j + s);
    (1.0 - a) * (1.0 - b) * v00 + a * (1.0 - b) * v10 + (1.0 - a) * b * v01 + a * b * v11
}

fn interpolate_lattice(grid: &QuadtreeGrid, u: &GridFunction, i: u32, j: u32) -> f64 {
    let c = grid
        .smallest_leaf_at(i, j)
        .expect("lattice point lies in some leaf");
    let s = c.side() as f64;
    bilinear(grid, u, &c, (i - c.i) as f64 / s, (j - c.j) as f64 / s)
}

/// Bilinear interpolant of `u` at a physical point; `None` outside the box.
pub fn interpolate(grid: &QuadtreeGrid, u: &GridFunction, x: f64, y: f64) -> Option<f64> {
    let c = grid.leaf_at_point(x, y)?;
    let (x0, y0, x1, y1) = grid.cell_rect(&c);
    Some(bilinear(grid, u, &c, (x - x0) / (x1 - x0), (y - y0) / (y1 - y0)))
}
