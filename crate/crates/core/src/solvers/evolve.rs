use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::newton::SolverLogEntry;
use super::schedule::{build_schedule, TimeGroups};
use super::OperatorFactory;
use crate::adaptivity::{compute_refinement, evaluate_criteria, regrid, RefinementPolicy};
use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::QuadtreeGrid;
use crate::operators::{Field, OperatorSpec};

/// Slack allowed in `τ L_i <= 1` for rounding.
const CFL_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub updates: usize,
    /// Largest `|F_i|` seen by any update during the step.
    pub max_residual: f64,
}

/// One coarse step: visit the groups in schedule order, updating each
/// group simultaneously by `u_i <- u_i - τ_g F_i[u]`.
pub fn euler_step(
    op: &OperatorSpec,
    grid: &QuadtreeGrid,
    u: &mut GridFunction,
    groups: &TimeGroups,
) -> Result<StepStats> {
    op.check(grid)?;
    u.check(grid)?;
    let mut stats = StepStats::default();
    let mut delta = Vec::new();
    for &g in &groups.schedule {
        let tau = groups.tau[g];
        let nodes = &groups.groups[g];
        delta.clear();
        for &i in nodes {
            let ratio = tau * op.lipschitz_at(i, u.values());
            if ratio > 1.0 + CFL_SLACK {
                return Err(Error::Instability { node: i, ratio });
            }
            let r = op.residual_at(i, u.values());
            stats.max_residual = stats.max_residual.max(r.abs());
            delta.push(tau * r);
        }
        for (&i, d) in nodes.iter().zip(&delta) {
            u[i] -= d;
        }
        stats.updates += nodes.len();
    }
    Ok(stats)
}

pub struct EvolveOptions {
    pub seed: u64,
    /// Regrid after every this many coarse steps; 0 disables regridding.
    pub regrid_every: usize,
    pub max_steps: usize,
    /// Exact initial data, resampled during the pre-evolution refinement
    /// loop instead of interpolating the previous grid.
    pub initial_data: Option<Field>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            seed: 0,
            regrid_every: 1,
            max_steps: 10_000_000,
            initial_data: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub grid: QuadtreeGrid,
    pub u: GridFunction,
}

#[derive(Clone, Debug)]
pub struct EvolveOutcome {
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    pub updates: u64,
    pub regrids: usize,
    /// One entry per coarse step.
    pub log: Vec<SolverLogEntry>,
}

fn refine_once(
    policy: &RefinementPolicy,
    op: &OperatorSpec,
    grid: &QuadtreeGrid,
    u: &GridFunction,
) -> Result<(QuadtreeGrid, GridFunction)> {
    let vals = evaluate_criteria(policy, op, grid, u)?;
    let reqs = compute_refinement(policy, &vals, grid, policy.finest_scale);
    regrid(grid, u, &reqs)
}

/// Forward Euler with local time steps from `0` to `t_end`, returning the
/// state at each snapshot time.
pub fn evolve(
    factory: &OperatorFactory<'_>,
    grid0: &QuadtreeGrid,
    u0: &GridFunction,
    t_end: f64,
    policy: Option<&RefinementPolicy>,
    snapshot_times: &[f64],
    opts: &EvolveOptions,
) -> Result<EvolveOutcome> {
    evolve_observed(factory, grid0, u0, t_end, policy, snapshot_times, opts, &mut |_, _| {})
}

/// As [`evolve`], calling `observer` with the grid and time groups of
/// every accepted coarse step.
#[allow(clippy::too_many_arguments)]
pub fn evolve_observed(
    factory: &OperatorFactory<'_>,
    grid0: &QuadtreeGrid,
    u0: &GridFunction,
    t_end: f64,
    policy: Option<&RefinementPolicy>,
    snapshot_times: &[f64],
    opts: &EvolveOptions,
    observer: &mut dyn FnMut(&QuadtreeGrid, &TimeGroups),
) -> Result<EvolveOutcome> {
    let start = Instant::now();
    if !(t_end > 0.0) {
        return Err(Error::Input(format!("final time {t_end} must be positive")));
    }
    let mut times: Vec<f64> = snapshot_times.to_vec();
    if times.iter().any(|t| !(0.0..=t_end).contains(t)) {
        return Err(Error::Input("snapshot times must lie in [0, T]".into()));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    u0.check(grid0)?;
    let mut grid = grid0.clone();
    let mut u = u0.clone();
    let mut regrids = 0;

    if let Some(p) = policy {
        for _ in 0..=grid.depth() + 2 {
            let op = factory(&grid)?;
            let (g2, mut u2) = refine_once(p, &op, &grid, &u)?;
            if g2.same_cells(&grid) {
                break;
            }
            if let Some(f) = &opts.initial_data {
                u2 = GridFunction::from_fn(&g2, |x, y| f(x, y));
            }
            grid = g2;
            u = u2;
            regrids += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut snaps = Vec::new();
    let mut next = 0;
    while next < times.len() && times[next] <= 0.0 {
        snaps.push(Snapshot {
            t: 0.0,
            grid: grid.clone(),
            u: u.clone(),
        });
        next += 1;
    }
    let mut t = 0.0;
    let mut steps = 0;
    let mut updates = 0u64;
    let mut log = Vec::new();
    let mut op = factory(&grid)?;
    op.apply_pins(u.values_mut());
    while t < t_end {
        if steps >= opts.max_steps {
            return Err(Error::StepLimit {
                steps: opts.max_steps,
                t,
            });
        }
        let target = times.get(next).copied().unwrap_or(t_end).min(t_end);
        let groups = build_schedule(&grid, &op, &u, &mut rng)?;
        let mut safety = 1.0;
        loop {
            let full = groups.coarse_step * safety;
            let (step, landed) = if t + full >= target {
                (target - t, true)
            } else {
                (full, false)
            };
            if groups.is_empty() {
                t = target;
                break;
            }
            let scaled = groups.scaled(step / groups.coarse_step);
            let mut trial = u.clone();
            match euler_step(&op, &grid, &mut trial, &scaled) {
                Ok(st) => {
                    updates += st.updates as u64;
                    observer(&grid, &scaled);
                    log.push(SolverLogEntry {
                        iteration: steps,
                        residual: st.max_residual,
                        node_count: grid.len(),
                        wall_time: start.elapsed().as_secs_f64(),
                    });
                    u = trial;
                    t = if landed { target } else { t + step };
                    break;
                }
                Err(Error::Instability { .. }) if safety > 1e-6 => safety *= 0.5,
                Err(e) => return Err(e),
            }
        }
        steps += 1;
        while next < times.len() && times[next] <= t {
            snaps.push(Snapshot {
                t: times[next],
                grid: grid.clone(),
                u: u.clone(),
            });
            next += 1;
        }
        if let Some(p) = policy {
            if opts.regrid_every > 0 && steps % opts.regrid_every == 0 && t < t_end {
                let (g2, u2) = refine_once(p, &op, &grid, &u)?;
                if !g2.same_cells(&grid) {
                    grid = g2;
                    u = u2;
                    op = factory(&grid)?;
                    op.apply_pins(u.values_mut());
                    regrids += 1;
                }
            }
        }
    }
    Ok(EvolveOutcome {
        snapshots: snaps,
        steps,
        updates,
        regrids,
        log,
    })
}
