use super::newton::{newton_to_tolerance, SolverLogEntry, StoppingPolicy};
use super::OperatorFactory;
use crate::adaptivity::{compute_refinement, evaluate_criteria, probe_grid, regrid, transfer, RefinementPolicy};
use crate::error::Result;
use crate::function::GridFunction;
use crate::grid::QuadtreeGrid;

/// One Newton solve inside the continuation.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveRecord {
    pub stage: usize,
    pub allowed_scale: u32,
    pub nodes: usize,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct MultiscaleOutcome {
    pub grid: QuadtreeGrid,
    pub u: GridFunction,
    pub solves: Vec<SolveRecord>,
    pub log: Vec<SolverLogEntry>,
}

impl MultiscaleOutcome {
    /// Linear solves, each tagged with the node count of its grid.
    pub fn linear_solve_sizes(&self) -> Vec<usize> {
        self.solves
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.nodes, s.iterations))
            .collect()
    }
}

/// Coarse-to-fine continuation: solve on the initial grid, then admit one
/// finer scale at a time, re-solving and regridding until the grid settles.
/// Grids only grow during the continuation.
pub fn multiscale_solve(
    factory: &OperatorFactory<'_>,
    grid0: &QuadtreeGrid,
    u0: Option<&GridFunction>,
    policy: &RefinementPolicy,
    stopping: &StoppingPolicy,
    max_regrids: usize,
) -> Result<MultiscaleOutcome> {
    multiscale_solve_observed(factory, grid0, u0, policy, stopping, max_regrids, &mut |_, _| {})
}

/// As [`multiscale_solve`], calling `observer` after every Newton solve.
pub fn multiscale_solve_observed(
    factory: &OperatorFactory<'_>,
    grid0: &QuadtreeGrid,
    u0: Option<&GridFunction>,
    policy: &RefinementPolicy,
    stopping: &StoppingPolicy,
    max_regrids: usize,
    observer: &mut dyn FnMut(&QuadtreeGrid, &SolveRecord),
) -> Result<MultiscaleOutcome> {
    let mut grid = grid0.clone();
    let mut u = match u0 {
        Some(u) => u.clone(),
        None => GridFunction::zeros(&grid),
    };
    let mut allowed = grid.finest_scale().max(policy.finest_scale);
    let mut stage = 0;
    let mut solves = Vec::new();
    let mut log = Vec::new();
    // (generation, tolerance) of the last solve; repeating it is a no-op
    let mut solved: Option<(u64, f64)> = None;
    loop {
        let tol = stopping.threshold(stage);
        for _ in 0..=max_regrids {
            if solved.is_none_or(|(gen, t)| gen != grid.generation() || tol < t) {
                let op = factory(&grid)?;
                let out = newton_to_tolerance(&op, &grid, &u, tol, stopping.max_iterations)?;
                solves.push(SolveRecord {
                    stage,
                    allowed_scale: allowed,
                    nodes: grid.len(),
                    iterations: out.iterations,
                    residual: out.residual,
                });
                observer(&grid, solves.last().unwrap());
                log.extend(out.log);
                u = out.u;
                solved = Some((grid.generation(), tol));
            }
            // a converged solution has (near) zero residual on its own grid,
            // so the criteria look at its prolongation one level finer
            let probe = probe_grid(&grid, allowed)?;
            let up = transfer(&grid, &u, &probe)?;
            let vals = evaluate_criteria(policy, &factory(&probe)?, &probe, &up)?;
            let mut reqs = compute_refinement(policy, &vals, &probe, allowed);
            reqs.cells.extend(grid.leaves());
            let (g2, u2) = regrid(&grid, &u, &reqs)?;
            if g2.same_cells(&grid) {
                break;
            }
            grid = g2;
            u = u2;
        }
        if allowed <= policy.finest_scale {
            if solved.is_none_or(|(gen, _)| gen != grid.generation()) {
                // regrid cap reached: solve once more on the last grid
                let op = factory(&grid)?;
                let out = newton_to_tolerance(&op, &grid, &u, tol, stopping.max_iterations)?;
                solves.push(SolveRecord {
                    stage,
                    allowed_scale: allowed,
                    nodes: grid.len(),
                    iterations: out.iterations,
                    residual: out.residual,
                });
                observer(&grid, solves.last().unwrap());
                log.extend(out.log);
                u = out.u;
            }
            break;
        }
        allowed -= 1;
        stage += 1;
    }
    Ok(MultiscaleOutcome {
        grid,
        u,
        solves,
        log,
    })
}
