//! Resource accounting and convergence studies.

use std::fmt::Write as _;

use super::presets::Region;
use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::{Cell, DomainBox, QuadtreeGrid};
use crate::operators::{field, instantiate_builtin, Field, OperatorKind, ProblemDefinition};
use crate::solvers::{newton_to_tolerance, SolveRecord, TimeGroups};

/// Accumulates work per region while a solver runs.
///
/// Work is counted in node updates: a Newton solve on `n` region nodes with
/// `k` iterations adds `k n` (at least `n`, for the residual check), and an
/// explicit coarse step adds `m_g` per node of each time group `g`.
#[derive(Clone, Debug)]
pub struct WorkMeter {
    regions: Vec<Region>,
    work: Vec<f64>,
}

impl WorkMeter {
    pub fn new(regions: &[Region]) -> Self {
        WorkMeter {
            regions: regions.to_vec(),
            work: vec![0.0; regions.len()],
        }
    }

    fn region_of(&self, x: f64, y: f64) -> Option<usize> {
        self.regions.iter().position(|r| r.contains(x, y))
    }

    pub fn record_solve(&mut self, grid: &QuadtreeGrid, rec: &SolveRecord) {
        let k = rec.iterations.max(1) as f64;
        for n in grid.nodes() {
            if let Some(r) = self.region_of(n.x, n.y) {
                self.work[r] += k;
            }
        }
    }

    pub fn record_step(&mut self, grid: &QuadtreeGrid, groups: &TimeGroups) {
        for (g, &m) in groups.groups.iter().zip(&groups.multiplicity) {
            for &i in g {
                let n = grid.node(i);
                if let Some(r) = self.region_of(n.x, n.y) {
                    self.work[r] += m as f64;
                }
            }
        }
    }

    pub fn work(&self) -> &[f64] {
        &self.work
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionStat {
    pub name: String,
    pub nodes: usize,
    pub node_share: f64,
    /// Share of the solver work, a hardware-independent proxy for time.
    pub time_share: f64,
    pub area_share: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResourceReport {
    pub regions: Vec<RegionStat>,
    pub total_nodes: usize,
    /// Newton solves as `(grid nodes, linear solves)`.
    pub solves: Vec<(usize, usize)>,
}

fn shares(v: &[f64]) -> Vec<f64> {
    let t: f64 = v.iter().sum();
    if t > 0.0 {
        v.iter().map(|x| x / t).collect()
    } else {
        vec![0.0; v.len()]
    }
}

impl ResourceReport {
    pub fn build(grid: &QuadtreeGrid, meter: &WorkMeter, solves: &[SolveRecord]) -> Self {
        let regions = &meter.regions;
        let mut nodes = vec![0usize; regions.len()];
        for n in grid.nodes() {
            if let Some(r) = meter.region_of(n.x, n.y) {
                nodes[r] += 1;
            }
        }
        let node_share = shares(&nodes.iter().map(|&n| n as f64).collect::<Vec<_>>());
        let time_share = shares(meter.work());
        let area_share = shares(&regions.iter().map(|r| r.area_in(grid.domain())).collect::<Vec<_>>());
        ResourceReport {
            regions: regions
                .iter()
                .enumerate()
                .map(|(k, r)| RegionStat {
                    name: r.name.clone(),
                    nodes: nodes[k],
                    node_share: node_share[k],
                    time_share: time_share[k],
                    area_share: area_share[k],
                })
                .collect(),
            total_nodes: grid.len(),
            solves: solves.iter().map(|s| (s.nodes, s.iterations)).collect(),
        }
    }

    pub fn region(&self, name: &str) -> Option<&RegionStat> {
        self.regions.iter().find(|r| r.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("region,node_share,time_share,area_share\n");
        for r in &self.regions {
            let _ = writeln!(s, "{},{},{},{}", r.name, r.node_share, r.time_share, r.area_share);
        }
        s
    }

    /// Linear solves performed on grids with fewer than `nodes` nodes.
    pub fn solves_below(&self, nodes: usize) -> usize {
        self.solves.iter().filter(|s| s.0 < nodes).map(|s| s.1).sum()
    }

    pub fn total_solves(&self) -> usize {
        self.solves.iter().map(|s| s.1).sum()
    }
}

/// A Poisson problem with known solution: `-Δu = source`, `u = exact` on
/// the walls.
#[derive(Clone)]
pub struct Manufactured {
    pub domain: DomainBox,
    pub exact: Field,
    pub source: Field,
}

impl Manufactured {
    /// `u = sin(πx) sin(πy)` on the unit square.
    pub fn sine() -> Self {
        use std::f64::consts::PI;
        Manufactured {
            domain: DomainBox::unit(),
            exact: field(|x, y| (PI * x).sin() * (PI * y).sin()),
            source: field(|x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub depth: u32,
    /// Finest spacing in `x`.
    pub h: f64,
    pub nodes: usize,
    pub error: f64,
    /// `log2(e_prev / e)`; absent on the first row.
    pub rate: Option<f64>,
}

/// Grid of depth `depth` at the finest scale, optionally with the half
/// `x >= 1/2` one scale coarser so that a column of dangling nodes remains.
pub fn convergence_grid(domain: DomainBox, depth: u32, dangling: bool) -> Result<QuadtreeGrid> {
    if !dangling {
        return QuadtreeGrid::uniform(domain, depth, depth);
    }
    if depth < 2 {
        return Err(Error::Input("a dangling band needs depth >= 2".into()));
    }
    let n = 1u32 << depth;
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n / 2 {
            cells.push(Cell::new(i, j, 0));
        }
    }
    for j in (0..n).step_by(2) {
        for i in (n / 2..n).step_by(2) {
            cells.push(Cell::new(i, j, 1));
        }
    }
    QuadtreeGrid::build(domain, depth, domain.default_pads(), &[], &cells)
}

/// Max-norm errors of the Poisson solve over the given depths.
pub fn convergence_report(problem: &Manufactured, depths: &[u32], dangling: bool) -> Result<Vec<ConvergenceRow>> {
    if depths.len() < 2 {
        return Err(Error::config(
            "convergence.levels",
            format!("need at least 2 scales, got {}", depths.len()),
        ));
    }
    let pd = ProblemDefinition::new(problem.source.clone(), problem.exact.clone());
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &depth in depths {
        let grid = convergence_grid(problem.domain, depth, dangling)?;
        let op = instantiate_builtin(OperatorKind::PoissonDirichlet, &pd, &grid)?;
        let out = newton_to_tolerance(&op, &grid, &GridFunction::zeros(&grid), 1e-9, 5)?;
        let exact = GridFunction::from_fn(&grid, |x, y| (problem.exact)(x, y));
        let error = out.u.max_diff(&exact);
        let rate = rows.last().map(|p| (p.error / error).log2());
        rows.push(ConvergenceRow {
            depth,
            h: grid.unit().0,
            nodes: grid.len(),
            error,
            rate,
        });
    }
    Ok(rows)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("depth,h,nodes,error,rate\n");
    for r in rows {
        let rate = r.rate.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{:e},{}", r.depth, r.h, r.nodes, r.error, rate);
    }
    s
}
