//! Per-node degenerate elliptic operators built from stencil rows.
//!
//! The PDE convention is `-Δu = f`; a linear interior node therefore has
//! residual `c (w̄ u_i - Σ w_j u_j - f_i) + d (u_i - g_i)`.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::{Direction, NodeClass, QuadtreeGrid};
use crate::stencil::{laplacian_row, robin_row, BoundaryRow, GradientStencil, Robin, StencilRow};

pub type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Indicator = Arc<dyn Fn(f64, f64) -> bool + Send + Sync>;
pub type RobinField = Arc<dyn Fn(Direction, f64, f64) -> Robin + Send + Sync>;

pub fn field(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Field {
    Arc::new(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    PoissonDirichlet,
    BcComposite,
    Obstacle,
    Stefan,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::PoissonDirichlet => "poisson_dirichlet",
            OperatorKind::BcComposite => "bc_composite",
            OperatorKind::Obstacle => "obstacle",
            OperatorKind::Stefan => "stefan",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "poisson_dirichlet" => OperatorKind::PoissonDirichlet,
            "bc_composite" => OperatorKind::BcComposite,
            "obstacle" => OperatorKind::Obstacle,
            "stefan" => OperatorKind::Stefan,
            other => return Err(Error::Problem(format!("unknown operator kind `{other}`"))),
        })
    }
}

/// Inner boundary of a circular hole with prescribed normal derivative.
///
/// Nodes inside the hole that have a neighbor outside it carry the flux
/// condition; deeper nodes are held at `u = g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeumannHole {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    /// `du/dn` with `n` the normal pointing into the hole.
    pub flux: f64,
}

impl NeumannHole {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.cx).hypot(y - self.cy) < self.radius
    }
}

/// Problem data shared by the builtin operators.
#[derive(Clone)]
pub struct ProblemDefinition {
    /// `χ_Ω`; `None` means the whole box.
    pub indicator: Option<Indicator>,
    pub source: Field,
    /// Boundary or obstacle datum `g`.
    pub datum: Field,
    /// Explicit `(c, d)`; by default `c = χ_Ω`, `d = 1 - χ_Ω`.
    pub weights: Option<(Field, Field)>,
    /// Robin data on the box walls; `None` means Dirichlet `u = g`.
    pub boundary: Option<RobinField>,
    pub hole: Option<NeumannHole>,
}

impl fmt::Debug for ProblemDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDefinition")
            .field("indicator", &self.indicator.is_some())
            .field("weights", &self.weights.is_some())
            .field("boundary", &self.boundary.is_some())
            .field("hole", &self.hole)
            .finish_non_exhaustive()
    }
}

impl ProblemDefinition {
    /// `-Δu = f` in the box with `u = g` on its walls.
    pub fn new(source: Field, datum: Field) -> Self {
        ProblemDefinition {
            indicator: None,
            source,
            datum,
            weights: None,
            boundary: None,
            hole: None,
        }
    }

    pub fn zero() -> Self {
        ProblemDefinition::new(field(|_, _| 0.0), field(|_, _| 0.0))
    }

    pub fn with_indicator(mut self, chi: impl Fn(f64, f64) -> bool + Send + Sync + 'static) -> Self {
        self.indicator = Some(Arc::new(chi));
        self
    }

    pub fn with_boundary(
        mut self,
        bc: impl Fn(Direction, f64, f64) -> Robin + Send + Sync + 'static,
    ) -> Self {
        self.boundary = Some(Arc::new(bc));
        self
    }

    pub fn with_weights(mut self, c: Field, d: Field) -> Self {
        self.weights = Some((c, d));
        self
    }

    pub fn with_hole(mut self, hole: NeumannHole) -> Self {
        self.hole = Some(hole);
        self
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        self.indicator.as_ref().is_none_or(|chi| chi(x, y))
    }
}

/// The residual map at one node.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeOp {
    /// Inactive node with a fixed value.
    Pinned(f64),
    /// `c (row - f) + d (u_i - g)`
    Linear {
        row: StencilRow,
        c: f64,
        d: f64,
        f: f64,
        g: f64,
    },
    /// `min(row - f, u_i - g)`
    Obstacle { row: StencilRow, f: f64, g: f64 },
    /// `row` where `u_i > 0`, `min(row, -|Du|²)` where `u_i <= 0`.
    Stefan { row: StencilRow, grad: GradientStencil },
    /// `(u_i - u_out)/dist - flux`
    Flux { center: usize, out: usize, dist: f64, flux: f64 },
}

/// Which branch of a `min` is active; ties go to the differential branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Pde,
    Other,
}

impl NodeOp {
    fn is_active(&self) -> bool {
        !matches!(self, NodeOp::Pinned(_))
    }

    fn branch(&self, u: &[f64]) -> Branch {
        match self {
            NodeOp::Obstacle { row, f, g } => {
                let i = row.center;
                if row.eval(u) - f <= u[i] - g {
                    Branch::Pde
                } else {
                    Branch::Other
                }
            }
            NodeOp::Stefan { row, grad } => {
                let i = row.center;
                if u[i] > 0.0 || row.eval(u) <= -grad.value(u) {
                    Branch::Pde
                } else {
                    Branch::Other
                }
            }
            _ => Branch::Pde,
        }
    }

    fn residual(&self, u: &[f64]) -> f64 {
        match self {
            NodeOp::Pinned(_) => 0.0,
            NodeOp::Linear { row, c, d, f, g } => {
                let mut r = d * (u[row.center] - g);
                if *c != 0.0 {
                    r += c * (row.eval(u) - f);
                }
                r
            }
            NodeOp::Obstacle { row, f, g } => (row.eval(u) - f).min(u[row.center] - g),
            NodeOp::Stefan { row, grad } => {
                let r = row.eval(u);
                if u[row.center] > 0.0 {
                    r
                } else {
                    r.min(-grad.value(u))
                }
            }
            NodeOp::Flux {
                center,
                out,
                dist,
                flux,
            } => (u[*center] - u[*out]) / dist - flux,
        }
    }

    /// Derivative of the active branch as `(column, value)` pairs.
    fn jacobian(&self, i: usize, u: &[f64], out: &mut Vec<(usize, f64)>) {
        let row_entries = |row: &StencilRow, scale: f64, out: &mut Vec<(usize, f64)>| {
            out.push((row.center, scale * row.diag));
            for &(j, w) in &row.terms {
                out.push((j, -scale * w));
            }
        };
        match self {
            NodeOp::Pinned(_) => {}
            NodeOp::Linear { row, c, d, .. } => {
                if *c != 0.0 {
                    row_entries(row, *c, out);
                }
                if *d != 0.0 {
                    out.push((i, *d));
                }
            }
            NodeOp::Obstacle { row, .. } => match self.branch(u) {
                Branch::Pde => row_entries(row, 1.0, out),
                Branch::Other => out.push((i, 1.0)),
            },
            NodeOp::Stefan { row, grad } => match self.branch(u) {
                Branch::Pde => row_entries(row, 1.0, out),
                Branch::Other => {
                    // d/du of -Σ s_a², s_a = (Σ w u_j - u_i)/Δ
                    let mut diag = 0.0;
                    for (act, cands) in grad.active(u).iter().zip(&grad.axes) {
                        if let Some((k, s)) = act {
                            let c = &cands[*k];
                            diag += 2.0 * s / c.dist;
                            for &(j, w) in &c.terms {
                                out.push((j, -2.0 * s * w / c.dist));
                            }
                        }
                    }
                    out.push((i, diag));
                }
            },
            NodeOp::Flux {
                center, out: o, dist, ..
            } => {
                out.push((*center, 1.0 / dist));
                out.push((*o, -1.0 / dist));
            }
        }
    }

    /// Upper bound on `∂F/∂u_i` at `u`.
    fn lipschitz(&self, u: &[f64]) -> f64 {
        match self {
            NodeOp::Pinned(_) => f64::INFINITY,
            NodeOp::Linear { row, c, d, .. } => c * row.diag + d,
            NodeOp::Obstacle { row, .. } => row.diag.max(1.0),
            NodeOp::Stefan { row, grad } => row.diag.max(grad.lipschitz(u)),
            NodeOp::Flux { dist, .. } => 1.0 / dist,
        }
    }
}

/// A builtin operator instantiated on one grid.
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    kind: OperatorKind,
    generation: u64,
    nodes: Vec<NodeOp>,
}

impl OperatorSpec {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_op(&self, i: usize) -> &NodeOp {
        &self.nodes[i]
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.nodes[i].is_active()
    }

    pub fn active_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.is_active(i)).collect()
    }

    pub fn pinned_value(&self, i: usize) -> Option<f64> {
        match self.nodes[i] {
            NodeOp::Pinned(v) => Some(v),
            _ => None,
        }
    }

    /// Overwrite inactive entries with their pinned values.
    pub fn apply_pins(&self, u: &mut [f64]) {
        for (i, op) in self.nodes.iter().enumerate() {
            if let NodeOp::Pinned(v) = op {
                u[i] = *v;
            }
        }
    }

    pub fn residual_at(&self, i: usize, u: &[f64]) -> f64 {
        self.nodes[i].residual(u)
    }

    pub fn branch_at(&self, i: usize, u: &[f64]) -> Branch {
        self.nodes[i].branch(u)
    }

    pub fn jacobian_row_at(&self, i: usize, u: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.nodes[i].jacobian(i, u, &mut out);
        out
    }

    pub fn lipschitz_at(&self, i: usize, u: &[f64]) -> f64 {
        self.nodes[i].lipschitz(u)
    }

    /// Stencil row behind the differential branch, if any.
    pub fn row_at(&self, i: usize) -> Option<&StencilRow> {
        match &self.nodes[i] {
            NodeOp::Linear { row, .. } | NodeOp::Obstacle { row, .. } | NodeOp::Stefan { row, .. } => {
                Some(row)
            }
            _ => None,
        }
    }

    pub fn gradient_at(&self, i: usize) -> Option<&GradientStencil> {
        match &self.nodes[i] {
            NodeOp::Stefan { grad, .. } => Some(grad),
            _ => None,
        }
    }

    /// `g_i` for operators that carry a datum.
    pub fn datum_at(&self, i: usize) -> Option<f64> {
        match &self.nodes[i] {
            NodeOp::Linear { g, .. } | NodeOp::Obstacle { g, .. } => Some(*g),
            _ => None,
        }
    }

    pub fn check(&self, grid: &QuadtreeGrid) -> Result<()> {
        if self.generation != grid.generation() {
            return Err(Error::GenerationMismatch {
                expected: grid.generation(),
                found: self.generation,
            });
        }
        Ok(())
    }
}

fn sample(f: &Field, x: f64, y: f64, what: &str) -> Result<f64> {
    let v = f(x, y);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Problem(format!("{what} undefined at ({x}, {y})")))
    }
}

/// Row at a node: the Laplacian in the interior, the Robin row (or a pin)
/// on the walls.
fn node_row(
    grid: &QuadtreeGrid,
    problem: &ProblemDefinition,
    kind: OperatorKind,
    i: usize,
) -> Result<BoundaryRow> {
    let n = grid.node(i);
    if n.class != NodeClass::Boundary {
        return Ok(BoundaryRow::Row(laplacian_row(grid, i)?));
    }
    match (&problem.boundary, kind) {
        (Some(bc), k) if k != OperatorKind::PoissonDirichlet => robin_row(grid, i, &**bc),
        _ => Ok(BoundaryRow::Pinned(sample(&problem.datum, n.x, n.y, "boundary datum")?)),
    }
}

fn flux_node(grid: &QuadtreeGrid, hole: &NeumannHole, i: usize) -> Option<NodeOp> {
    let n = grid.node(i);
    let (rx, ry) = (hole.cx - n.x, hole.cy - n.y);
    let r = rx.hypot(ry);
    let mut best: Option<(f64, usize, f64)> = None;
    for nb in n.neighbors.iter().flatten() {
        let m = grid.node(nb.node);
        if hole.contains(m.x, m.y) {
            continue;
        }
        // unit vector from the outside neighbor toward this node
        let (ex, ey) = ((n.x - m.x) / nb.dist, (n.y - m.y) / nb.dist);
        let cos = if r > 0.0 { (ex * rx + ey * ry) / r } else { 1.0 };
        if best.is_none_or(|b| cos > b.0) {
            best = Some((cos, nb.node, nb.dist));
        }
    }
    best.map(|(cos, out, dist)| NodeOp::Flux {
        center: i,
        out,
        dist,
        flux: hole.flux * cos.max(0.0),
    })
}

/// Instantiate a builtin operator on `grid`.
pub fn instantiate_builtin(
    kind: OperatorKind,
    problem: &ProblemDefinition,
    grid: &QuadtreeGrid,
) -> Result<OperatorSpec> {
    let mut nodes = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let n = grid.node(i);
        let (x, y) = (n.x, n.y);
        if let Some(h) = problem.hole.as_ref().filter(|h| h.contains(x, y)) {
            let op = match flux_node(grid, h, i) {
                Some(op) => op,
                None => NodeOp::Linear {
                    row: StencilRow::new(i),
                    c: 0.0,
                    d: 1.0,
                    f: 0.0,
                    g: sample(&problem.datum, x, y, "datum")?,
                },
            };
            nodes.push(op);
            continue;
        }
        let inside = problem.inside(x, y);
        if !inside && kind == OperatorKind::BcComposite && problem.weights.is_none() {
            nodes.push(NodeOp::Linear {
                row: StencilRow::new(i),
                c: 0.0,
                d: 1.0,
                f: 0.0,
                g: sample(&problem.datum, x, y, "datum")?,
            });
            continue;
        }
        let row = match node_row(grid, problem, kind, i)? {
            BoundaryRow::Pinned(v) => {
                nodes.push(NodeOp::Pinned(v));
                continue;
            }
            BoundaryRow::Row(r) => r,
        };
        let op = match kind {
            OperatorKind::PoissonDirichlet => NodeOp::Linear {
                row,
                c: 1.0,
                d: 0.0,
                f: sample(&problem.source, x, y, "source")?,
                g: 0.0,
            },
            OperatorKind::BcComposite => {
                let (c, d) = match &problem.weights {
                    Some((c, d)) => (sample(c, x, y, "weight c")?, sample(d, x, y, "weight d")?),
                    None => (1.0, 0.0),
                };
                if c < 0.0 || d < 0.0 {
                    return Err(Error::Problem(format!(
                        "weights must be nonnegative, got c = {c}, d = {d} at ({x}, {y})"
                    )));
                }
                let f = if c != 0.0 { sample(&problem.source, x, y, "source")? } else { 0.0 };
                let g = if d != 0.0 { sample(&problem.datum, x, y, "datum")? } else { 0.0 };
                NodeOp::Linear { row, c, d, f, g }
            }
            OperatorKind::Obstacle => NodeOp::Obstacle {
                row,
                f: sample(&problem.source, x, y, "source")?,
                g: sample(&problem.datum, x, y, "obstacle")?,
            },
            OperatorKind::Stefan => NodeOp::Stefan {
                row,
                grad: GradientStencil::build(grid, i),
            },
        };
        nodes.push(op);
    }
    Ok(OperatorSpec {
        kind,
        generation: grid.generation(),
        nodes,
    })
}

fn check_all(op: &OperatorSpec, grid: &QuadtreeGrid, u: &GridFunction) -> Result<()> {
    op.check(grid)?;
    u.check(grid)
}

/// Residual at every node; inactive nodes report 0.
pub fn assemble_residual(
    op: &OperatorSpec,
    grid: &QuadtreeGrid,
    u: &GridFunction,
) -> Result<GridFunction> {
    check_all(op, grid, u)?;
    let v = u.values();
    let r: Vec<f64> = (0..op.len()).map(|i| op.residual_at(i, v)).collect();
    GridFunction::new(grid, r)
}

/// Generalized Jacobian rows of the active nodes, in global node indices.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianRows {
    pub active: Vec<usize>,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl JacobianRows {
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `row col value` triplets, one per line.
    pub fn to_triplets(&self) -> String {
        let mut s = String::new();
        for (i, row) in self.active.iter().zip(&self.rows) {
            for (j, v) in row {
                let _ = writeln!(s, "{i} {j} {v:e}");
            }
        }
        s
    }
}

pub fn assemble_jacobian(
    op: &OperatorSpec,
    grid: &QuadtreeGrid,
    u: &GridFunction,
) -> Result<JacobianRows> {
    check_all(op, grid, u)?;
    let v = u.values();
    let active = op.active_nodes();
    let rows = active.iter().map(|&i| op.jacobian_row_at(i, v)).collect();
    Ok(JacobianRows { active, rows })
}

/// Local time step `dt_i = 1 / L_i`; `+∞` for inactive or decoupled nodes.
pub fn cfl_bounds(op: &OperatorSpec, grid: &QuadtreeGrid, u: &GridFunction) -> Result<Vec<f64>> {
    check_all(op, grid, u)?;
    let v = u.values();
    Ok((0..op.len())
        .map(|i| {
            let l = op.lipschitz_at(i, v);
            if l > 0.0 && l.is_finite() {
                1.0 / l
            } else {
                f64::INFINITY
            }
        })
        .collect())
}

/// Residual as `row 0 value` triplets, for offline inspection.
pub fn residual_triplets(r: &GridFunction) -> String {
    let mut s = String::new();
    for (i, v) in r.values().iter().enumerate() {
        let _ = writeln!(s, "{i} 0 {v:e}");
    }
    s
}
