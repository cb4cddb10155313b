use std::fs;
use std::path::Path;

use quadfd::grid::parse_grid_dump;
use quadfd::harness::{
    execute, parse_solution_csv, resolve, run_experiment, solution_from_rows, ExperimentConfig, Preset,
};
use quadfd::{Error, NodeClass};

fn config(text: &str, out: &Path) -> ExperimentConfig {
    format!("{text}\noutput = {}\n", out.display()).parse().unwrap()
}

fn field_of(text: &str) -> String {
    let err = match text.parse::<ExperimentConfig>() {
        Ok(cfg) => resolve(&cfg).unwrap_err(),
        Err(e) => e,
    };
    match err {
        Error::Config { field, .. } => field,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn svg_matches_the_grid_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("preset = punctured_neumann\ndepth = 6\ninitial_level = 3", dir.path());
    run_experiment(&cfg).unwrap();
    let dump = parse_grid_dump(&fs::read_to_string(dir.path().join("grid.dump")).unwrap()).unwrap();
    let svg = fs::read_to_string(dir.path().join("grid.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="leaf""#).count(), dump.cells.len());
    assert_eq!(svg.matches(r#"class="node "#).count(), dump.nodes.len());
    for (class, label) in [
        (NodeClass::Regular, "regular"),
        (NodeClass::DanglingX, "dangling-x"),
        (NodeClass::DanglingY, "dangling-y"),
        (NodeClass::Boundary, "boundary"),
    ] {
        let want = dump.nodes.iter().filter(|n| n.class == class).count();
        assert_eq!(svg.matches(&format!(r#"class="node {label}""#)).count(), want, "{label}");
    }
    let grid = dump.rebuild().unwrap();
    let rows = parse_solution_csv(&fs::read_to_string(dir.path().join("solution.csv")).unwrap()).unwrap();
    let u = solution_from_rows(&grid, &rows).unwrap();
    assert_eq!(u.len(), grid.len());
    let contours = fs::read_to_string(dir.path().join("contour.csv")).unwrap();
    assert!(contours.starts_with("curve_id,seq,x,y\n"));
    assert!(contours.lines().count() > 1);
}

#[test]
fn report_shares_sum_to_one() {
    let r = execute(&resolve(&"preset = artificial_bc\ndepth = 10\ndomain.side = 40".parse().unwrap()).unwrap()).unwrap();
    for share in [
        |s: &quadfd::harness::RegionStat| s.node_share,
        |s: &quadfd::harness::RegionStat| s.time_share,
    ] {
        let total: f64 = r.report.regions.iter().map(share).sum();
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }
    let area: f64 = r.report.regions.iter().map(|s| s.area_share).sum();
    assert!((area - 1.0).abs() < 1e-9, "{area}");
    let csv = r.report.to_csv();
    assert!(csv.starts_with("region,node_share,time_share,area_share\n"));
    assert_eq!(csv.lines().count(), r.report.regions.len() + 1);
}

#[test]
fn evolve_writes_every_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "preset = stefan\ndepth = 6\ninitial_level = 4\ntime.final = 0.002\ntime.snapshots = 0, 0.001",
        dir.path(),
    );
    let r = run_experiment(&cfg).unwrap();
    assert_eq!(r.snapshots.len(), 3);
    let times = fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    assert_eq!(times.lines().count(), 4);
    for k in 0..3 {
        for f in ["solution.csv", "grid.dump", "contour.csv"] {
            assert!(dir.path().join(format!("snapshot_{k}_{f}")).exists());
        }
    }
}

#[test]
fn seeds_reproduce_runs() {
    let text = "preset = stefan\ndepth = 6\ninitial_level = 4\nrefine.criterion = operator\ntime.final = 0.001\nseed = 3";
    let a = execute(&resolve(&text.parse().unwrap()).unwrap()).unwrap();
    let b = execute(&resolve(&text.parse().unwrap()).unwrap()).unwrap();
    assert!(a.grid.same_cells(&b.grid));
    assert_eq!(a.u.values(), b.u.values());
}

#[test]
fn solver_failure_keeps_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("preset = obstacle\ndepth = 6\nstop.max_iterations = 1\nstop.thresholds = 1e-12", dir.path());
    match run_experiment(&cfg) {
        Err(Error::NonConvergence { .. }) => {}
        other => panic!("{:?}", other.map(|r| r.grid.len())),
    }
    let failure = fs::read_to_string(dir.path().join("failure.txt")).unwrap();
    assert!(failure.contains("did not converge"), "{failure}");
    assert!(dir.path().join("solves.csv").exists());
}

#[test]
fn step_limit_is_a_solver_failure() {
    let cfg: ExperimentConfig = "preset = stefan\ndepth = 6\ntime.max_steps = 2".parse().unwrap();
    assert!(matches!(execute(&resolve(&cfg).unwrap()), Err(Error::StepLimit { steps: 2, .. })));
}

#[test]
fn config_errors_name_the_offending_key() {
    assert_eq!(field_of("depth = 3"), "preset");
    assert_eq!(field_of("preset = obstacle\ndepth = -1"), "depth");
    assert_eq!(field_of("preset = obstacle\nrefine.criterion = psychic"), "refine.criterion");
    assert_eq!(field_of("preset = obstacle\nrefine.bands = 0.5"), "refine.bands");
    assert_eq!(field_of("preset = obstacle\ndomain = 0, 1, 0"), "domain");
    assert_eq!(field_of("preset = obstacle\ntime.final = 0"), "time.final");
    assert_eq!(field_of("preset = obstacle\nstop.thresholds = 1e-8, 1e-4"), "stop.thresholds");
    assert_eq!(field_of("preset = obstacle\ndepth = 5\ninitial_level = 7"), "initial_level");
    assert_eq!(field_of("preset = custom\ncustom.source = x +"), "custom.source");
    assert_eq!(field_of("preset = custom\ncustom.operator = heat"), "custom.operator");
    assert_eq!(field_of("just words"), "line 1");
}

#[test]
fn every_preset_resolves_with_defaults() {
    for p in Preset::ALL {
        let cfg = ExperimentConfig::new(p);
        let exp = resolve(&cfg).unwrap_or_else(|e| panic!("{p}: {e}"));
        assert!(!exp.grid0.is_empty(), "{p}");
    }
}
