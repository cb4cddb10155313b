use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quadfd::contour::extract_contour;
use quadfd::grid::parse_grid_dump;
use quadfd::harness::{
    convergence_csv, convergence_report, output_dir, parse_solution_csv, render_svg, run_experiment,
    solution_from_rows, write_atomic, ExperimentConfig, Manufactured, RunResult, SolverKind,
};
use quadfd::Error;

#[derive(Parser)]
#[command(name = "quadfd", version, about = "Adaptive quadtree finite difference experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or SVG file for `render`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Steady problem by multiscale Newton.
    Solve { config: PathBuf },
    /// Time-dependent problem by asynchronous forward Euler.
    Evolve { config: PathBuf },
    /// Manufactured-solution convergence table.
    Convergence { config: PathBuf },
    /// SVG of a grid dump shaded by a solution CSV.
    Render {
        grid_dump: PathBuf,
        solution_csv: PathBuf,
        /// Also draw the contour at this level.
        #[arg(long)]
        level: Option<f64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::Input(_)
        | Error::InvalidDomain(_)
        | Error::OutsideDomain { .. }
        | Error::ScaleTooLarge { .. }
        | Error::Problem(_) => 2,
        _ => 3,
    }
}

fn load(cli: &Cli, path: &Path, solver: Option<SolverKind>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    if let Some(want) = solver {
        match cfg.solver {
            Some(have) if have != want => {
                return Err(Error::Config {
                    field: "solver".into(),
                    message: format!("`{}` conflicts with this command", have.name()),
                })
            }
            _ => cfg.solver = Some(want),
        }
    }
    Ok(cfg)
}

fn summary(r: &RunResult, dir: &Path) {
    println!("final grid: {} nodes, {} leaves", r.grid.len(), r.grid.leaves().len());
    if !r.solves.is_empty() {
        let last = r.solves.last().unwrap();
        println!(
            "Newton: {} solves over {} grids, final residual {:e}",
            r.report.total_solves(),
            r.solves.len(),
            last.residual
        );
    }
    if r.steps > 0 {
        println!("explicit steps: {}, snapshots: {}", r.steps, r.snapshots.len());
    }
    println!("contours: {}", r.contours.len());
    println!("{:<14} {:>10} {:>10} {:>12}", "region", "nodes", "work", "area");
    for s in &r.report.regions {
        println!(
            "{:<14} {:>9.2}% {:>9.2}% {:>11.5}%",
            s.name,
            100.0 * s.node_share,
            100.0 * s.time_share,
            100.0 * s.area_share
        );
    }
    println!("artifacts written to {}", dir.display());
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Solve { config } | Command::Evolve { config } => {
            let kind = match cli.command {
                Command::Solve { .. } => SolverKind::NewtonMultiscale,
                _ => SolverKind::EulerEvolve,
            };
            let cfg = load(cli, config, Some(kind))?;
            let r = run_experiment(&cfg)?;
            if !cli.quiet {
                summary(&r, &output_dir(&cfg));
            }
        }
        Command::Convergence { config } => {
            let cfg = load(cli, config, None)?;
            let levels = cfg
                .convergence
                .levels
                .clone()
                .ok_or_else(|| Error::Config {
                    field: "convergence.levels".into(),
                    message: "missing".into(),
                })?;
            let mut problem = Manufactured::sine();
            match (&cfg.custom.exact, &cfg.custom.source) {
                (Some(e), Some(s)) => {
                    problem.exact = e.to_field();
                    problem.source = s.to_field();
                }
                (None, None) => {}
                (None, Some(_)) => {
                    return Err(Error::Config {
                        field: "custom.exact".into(),
                        message: "required together with custom.source".into(),
                    })
                }
                (Some(_), None) => {
                    return Err(Error::Config {
                        field: "custom.source".into(),
                        message: "required together with custom.exact".into(),
                    })
                }
            }
            if let Some(d) = cfg.domain {
                problem.domain = d;
            }
            let rows = convergence_report(&problem, &levels, cfg.convergence.dangling)?;
            let dir = output_dir(&cfg);
            write_atomic(&dir.join("convergence.csv"), &convergence_csv(&rows))?;
            if !cli.quiet {
                println!("{:>5} {:>12} {:>8} {:>12} {:>6}", "depth", "h", "nodes", "error", "rate");
                for r in &rows {
                    let rate = r.rate.map(|v| format!("{v:.2}")).unwrap_or_default();
                    println!("{:>5} {:>12.3e} {:>8} {:>12.3e} {:>6}", r.depth, r.h, r.nodes, r.error, rate);
                }
                println!("written to {}", dir.join("convergence.csv").display());
            }
        }
        Command::Render {
            grid_dump,
            solution_csv,
            level,
        } => {
            let read = |p: &Path| {
                std::fs::read_to_string(p).map_err(|e| Error::Input(format!("cannot read {}: {e}", p.display())))
            };
            let dump = read(grid_dump)?;
            let grid = parse_grid_dump(&dump)?.rebuild()?;
            let rows = parse_solution_csv(&read(solution_csv)?)?;
            let u = solution_from_rows(&grid, &rows)?;
            let contours = match level {
                Some(l) => extract_contour(&grid, &u, *l)?,
                None => Vec::new(),
            };
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| solution_csv.with_extension("svg"));
            write_atomic(&out, &render_svg(&grid, Some(&u), &contours))?;
            if !cli.quiet {
                println!("{} leaves, {} nodes -> {}", grid.leaves().len(), grid.len(), out.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
