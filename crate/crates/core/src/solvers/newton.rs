use std::time::Instant;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::QuadtreeGrid;
use crate::operators::OperatorSpec;

/// Relative residual required of every linear solve.
const LINEAR_TOLERANCE: f64 = 1e-10;

/// Per-stage residual bounds (max-norm of the operator).
#[derive(Clone, Debug, PartialEq)]
pub struct StoppingPolicy {
    thresholds: Vec<f64>,
    pub max_iterations: usize,
}

impl StoppingPolicy {
    /// `thresholds` must be nonempty, positive and nonincreasing.
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::Input("stopping thresholds are empty".into()));
        }
        if thresholds.iter().any(|t| !(*t > 0.0)) || thresholds.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Input(
                "stopping thresholds must be positive and nonincreasing".into(),
            ));
        }
        Ok(StoppingPolicy {
            thresholds,
            max_iterations: 100,
        })
    }

    pub fn single(threshold: f64) -> Result<Self> {
        StoppingPolicy::new(vec![threshold])
    }

    /// Bound for the `stage`-th allowed scale (the last one repeats).
    pub fn threshold(&self, stage: usize) -> f64 {
        self.thresholds[stage.min(self.thresholds.len() - 1)]
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

/// One row of a solver log: a Newton iteration or an explicit step.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverLogEntry {
    pub iteration: usize,
    pub residual: f64,
    pub node_count: usize,
    /// Seconds since the solve started.
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub u: GridFunction,
    /// Linear solves performed.
    pub iterations: usize,
    pub residual: f64,
    pub log: Vec<SolverLogEntry>,
}

/// Newton's method with full steps and the first stopping threshold.
pub fn newton_solve(
    op: &OperatorSpec,
    grid: &QuadtreeGrid,
    u0: &GridFunction,
    stopping: &StoppingPolicy,
) -> Result<NewtonOutcome> {
    newton_to_tolerance(op, grid, u0, stopping.threshold(0), stopping.max_iterations)
}

fn max_residual(op: &OperatorSpec, active: &[usize], u: &[f64], r: &mut [f64]) -> f64 {
    let mut m: f64 = 0.0;
    for (k, &i) in active.iter().enumerate() {
        r[k] = op.residual_at(i, u);
        m = m.max(r[k].abs());
    }
    m
}

/// Newton iteration until `max |F| <= tol` over the active nodes.
pub fn newton_to_tolerance(
    op: &OperatorSpec,
    grid: &QuadtreeGrid,
    u0: &GridFunction,
    tol: f64,
    max_iterations: usize,
) -> Result<NewtonOutcome> {
    op.check(grid)?;
    u0.check(grid)?;
    let start = Instant::now();
    let mut u = u0.clone();
    op.apply_pins(u.values_mut());
    let active = op.active_nodes();
    let mut local = vec![usize::MAX; grid.len()];
    for (k, &i) in active.iter().enumerate() {
        local[i] = k;
    }
    let n = active.len();
    let mut r = vec![0.0; n];
    let mut log = Vec::new();
    let mut iterations = 0;
    loop {
        let res = max_residual(op, &active, u.values(), &mut r);
        if !res.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
            });
        }
        log.push(SolverLogEntry {
            iteration: iterations,
            residual: res,
            node_count: grid.len(),
            wall_time: start.elapsed().as_secs_f64(),
        });
        if res <= tol || n == 0 {
            return Ok(NewtonOutcome {
                u,
                iterations,
                residual: res,
                log,
            });
        }
        if iterations >= max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
            });
        }
        let mut trips = Vec::new();
        for (k, &i) in active.iter().enumerate() {
            let mut row = op.jacobian_row_at(i, u.values());
            row.sort_by_key(|e| e.0);
            let mut last: Option<(usize, f64)> = None;
            for (j, v) in row.into_iter().chain(std::iter::once((usize::MAX, 0.0))) {
                match last {
                    Some((lj, lv)) if lj == j => last = Some((lj, lv + v)),
                    _ => {
                        if let Some((lj, lv)) = last {
                            // pinned columns drop out: their update is zero
                            if local[lj] != usize::MAX && lv != 0.0 {
                                trips.push(Triplet::new(k, local[lj], lv));
                            }
                        }
                        last = Some((j, v));
                    }
                }
            }
        }
        let delta = sparse_solve(n, &trips, &r)?;
        for (k, &i) in active.iter().enumerate() {
            u[i] -= delta[k];
        }
        iterations += 1;
    }
}

/// Solve `J x = b` by sparse LU with iterative refinement until the
/// relative residual is below the linear tolerance.
fn sparse_solve(n: usize, trips: &[Triplet<usize, usize, f64>], b: &[f64]) -> Result<Vec<f64>> {
    let j = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, trips)
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let lu = j.sp_lu().map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = vec![0.0; n];
    let mut resid = b.to_vec();
    for _ in 0..4 {
        let rhs = Mat::<f64>::from_fn(n, 1, |i, _| resid[i]);
        let dx = lu.solve(&rhs);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += dx[(i, 0)];
        }
        resid.copy_from_slice(b);
        for t in trips {
            resid[t.row] -= t.val * x[t.col];
        }
        let rn = resid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !rn.is_finite() {
            break;
        }
        if rn <= LINEAR_TOLERANCE * bnorm {
            return Ok(x);
        }
    }
    Err(Error::LinearSolve(
        "relative residual above tolerance (singular Jacobian?)".into(),
    ))
}
