//! Configuration-driven experiments: presets, solver orchestration and
//! on-disk artifacts.

mod config;
mod expr;
mod output;
mod presets;
mod report;

use std::path::{Path, PathBuf};

pub use config::{
    ConvergenceConfig, CriterionName, CustomConfig, ExperimentConfig, Preset, RefineConfig, SolverKind, StopConfig,
    TimeConfig,
};
pub use expr::Expression;
pub use output::{
    contour_csv, log_csv, parse_solution_csv, render_svg, solution_csv, solution_from_rows, solves_csv, write_atomic,
};
pub use presets::{
    artificial_robin, artificial_source, irregular_datum, irregular_level_set, obstacle_datum, resolve, stefan_initial,
    ContourSpec, Experiment, FieldDebug, Region, OBSTACLE_MAXIMA, PUNCTURE, STEFAN_BUMPS, STEFAN_OFFSET, STEFAN_WIDTH,
};
pub use report::{
    convergence_csv, convergence_grid, convergence_report, ConvergenceRow, Manufactured, RegionStat, ResourceReport,
    WorkMeter,
};

use crate::contour::{extract_contour, Polyline};
use crate::error::Result;
use crate::function::GridFunction;
use crate::grid::{write_grid_dump, QuadtreeGrid};
use crate::operators::instantiate_builtin;
use crate::solvers::{
    evolve_observed, multiscale_solve_observed, newton_to_tolerance, EvolveOptions, Snapshot, SolveRecord,
    SolverLogEntry,
};

/// Everything an experiment produced, before it is written out.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub grid: QuadtreeGrid,
    pub u: GridFunction,
    pub contours: Vec<Polyline>,
    pub report: ResourceReport,
    pub log: Vec<SolverLogEntry>,
    pub solves: Vec<SolveRecord>,
    /// Parabolic runs only, in time order, with their contours.
    pub snapshots: Vec<(Snapshot, Vec<Polyline>)>,
    pub steps: usize,
}

/// Contours of `u` according to `spec`.
pub fn contours_for(exp: &Experiment, grid: &QuadtreeGrid, u: &GridFunction) -> Result<Vec<Polyline>> {
    match exp.contour {
        None => Ok(Vec::new()),
        Some(ContourSpec::Level(l)) => extract_contour(grid, u, l),
        Some(ContourSpec::Contact(eps)) => {
            let op = instantiate_builtin(exp.kind, &exp.problem, grid)?;
            let mut gap: Vec<f64> = grid
                .nodes()
                .iter()
                .zip(u.values())
                .map(|(n, v)| v - (exp.problem.datum)(n.x, n.y))
                .collect();
            // pinned nodes hold u = g by fiat; they take the smallest gap of
            // the active corners they share a leaf with
            let top = gap.iter().cloned().fold(eps, f64::max).abs() + 1.0;
            let mut pinned = vec![f64::INFINITY; gap.len()];
            for c in grid.leaves() {
                let ids: Vec<usize> = c.corners().iter().filter_map(|q| grid.node_at(q.i, q.j)).collect();
                let m = ids
                    .iter()
                    .filter(|&&k| op.is_active(k))
                    .map(|&k| gap[k])
                    .fold(f64::INFINITY, f64::min);
                for &k in &ids {
                    pinned[k] = pinned[k].min(m);
                }
            }
            for (i, g) in gap.iter_mut().enumerate() {
                if !op.is_active(i) {
                    *g = if pinned[i].is_finite() { pinned[i] } else { top };
                }
            }
            extract_contour(grid, &GridFunction::new(grid, gap)?, eps)
        }
    }
}

fn execute_inner(exp: &Experiment, meter: &mut WorkMeter, solves: &mut Vec<SolveRecord>) -> Result<RunResult> {
    let factory = |g: &QuadtreeGrid| instantiate_builtin(exp.kind, &exp.problem, g);
    let u0 = exp
        .initial
        .as_ref()
        .map(|f| GridFunction::from_fn(&exp.grid0, |x, y| (f.0)(x, y)));
    match exp.solver {
        SolverKind::NewtonMultiscale => {
            let (grid, u, log) = match &exp.policy {
                Some(policy) => {
                    let out = multiscale_solve_observed(
                        &factory,
                        &exp.grid0,
                        u0.as_ref(),
                        policy,
                        &exp.stopping,
                        exp.max_regrids,
                        &mut |g, rec| {
                            meter.record_solve(g, rec);
                            solves.push(rec.clone());
                        },
                    )?;
                    (out.grid, out.u, out.log)
                }
                None => {
                    let op = factory(&exp.grid0)?;
                    let start = u0.unwrap_or_else(|| GridFunction::zeros(&exp.grid0));
                    let out = newton_to_tolerance(
                        &op,
                        &exp.grid0,
                        &start,
                        exp.stopping.threshold(exp.stopping.thresholds().len() - 1),
                        exp.stopping.max_iterations,
                    )?;
                    let rec = SolveRecord {
                        stage: 0,
                        allowed_scale: exp.grid0.finest_scale(),
                        nodes: exp.grid0.len(),
                        iterations: out.iterations,
                        residual: out.residual,
                    };
                    meter.record_solve(&exp.grid0, &rec);
                    solves.push(rec);
                    (exp.grid0.clone(), out.u, out.log)
                }
            };
            let contours = contours_for(exp, &grid, &u)?;
            let report = ResourceReport::build(&grid, meter, solves);
            Ok(RunResult {
                grid,
                u,
                contours,
                report,
                log,
                solves: solves.clone(),
                snapshots: Vec::new(),
                steps: 0,
            })
        }
        SolverKind::EulerEvolve => {
            let u0 = u0.unwrap_or_else(|| GridFunction::zeros(&exp.grid0));
            let opts = EvolveOptions {
                seed: exp.seed,
                regrid_every: exp.regrid_every,
                max_steps: exp.max_steps,
                initial_data: exp.initial.as_ref().map(|f| f.0.clone()),
            };
            let out = evolve_observed(
                &factory,
                &exp.grid0,
                &u0,
                exp.final_time,
                exp.policy.as_ref(),
                &exp.snapshots,
                &opts,
                &mut |g, groups| meter.record_step(g, groups),
            )?;
            let mut snapshots = Vec::new();
            for s in out.snapshots {
                let c = contours_for(exp, &s.grid, &s.u)?;
                snapshots.push((s, c));
            }
            let (last, contours) = snapshots.last().cloned().expect("final time is always a snapshot");
            let report = ResourceReport::build(&last.grid, meter, &[]);
            Ok(RunResult {
                grid: last.grid,
                u: last.u,
                contours,
                report,
                log: out.log,
                solves: Vec::new(),
                snapshots,
                steps: out.steps,
            })
        }
    }
}

/// Run a resolved experiment without touching the file system.
pub fn execute(exp: &Experiment) -> Result<RunResult> {
    execute_inner(exp, &mut WorkMeter::new(&exp.regions), &mut Vec::new())
}

/// Write every artifact of `result` under `dir`; returns the paths written.
pub fn write_artifacts(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, &text)?;
        files.push(p);
        Ok(())
    };
    put("solution.csv".into(), solution_csv(&result.grid, &result.u))?;
    put("grid.dump".into(), write_grid_dump(&result.grid))?;
    put("contour.csv".into(), contour_csv(&result.contours))?;
    put("report.csv".into(), result.report.to_csv())?;
    put("solver_log.csv".into(), log_csv(&result.log))?;
    put("solves.csv".into(), solves_csv(&result.solves))?;
    put("grid.svg".into(), render_svg(&result.grid, Some(&result.u), &result.contours))?;
    for (k, (s, c)) in result.snapshots.iter().enumerate() {
        put(format!("snapshot_{k}_solution.csv"), solution_csv(&s.grid, &s.u))?;
        put(format!("snapshot_{k}_grid.dump"), write_grid_dump(&s.grid))?;
        put(format!("snapshot_{k}_contour.csv"), contour_csv(c))?;
    }
    if !result.snapshots.is_empty() {
        let mut times = String::from("snapshot,t\n");
        for (k, (s, _)) in result.snapshots.iter().enumerate() {
            times.push_str(&format!("{k},{}\n", s.t));
        }
        put("snapshots.csv".into(), times)?;
    }
    Ok(files)
}

/// Default output directory for a configuration.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.preset.name()))
}

/// Resolve, run and write out `cfg`. On solver failure the Newton solves
/// completed so far are still written, together with `failure.txt`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    let exp = resolve(cfg)?;
    let dir = output_dir(cfg);
    let mut meter = WorkMeter::new(&exp.regions);
    let mut solves = Vec::new();
    match execute_inner(&exp, &mut meter, &mut solves) {
        Ok(r) => {
            write_artifacts(&r, &dir)?;
            Ok(r)
        }
        Err(e) => {
            write_atomic(&dir.join("solves.csv"), &solves_csv(&solves))?;
            write_atomic(&dir.join("failure.txt"), &format!("{e}\n"))?;
            Err(e)
        }
    }
}
