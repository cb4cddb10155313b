mod common;

use common::*;
use quadfd::operators::{field, instantiate_builtin, OperatorKind, ProblemDefinition};
use quadfd::solvers::newton_to_tolerance;
use quadfd::stencil::laplacian_row;
use quadfd::{DomainBox, GridFunction, NodeClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn laplacian_is_exact_on_quadratics_at_regular_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let d = random_box(&mut rng);
        let depth = rng.random_range(2..6);
        let grid = random_grid(&mut rng, d, depth);
        let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let u: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|n| c[0] * n.x * n.x + c[1] * n.x * n.y + c[2] * n.y * n.y + c[3] * n.x + c[4] * n.y + c[5])
            .collect();
        let exact = -2.0 * (c[0] + c[2]);
        for (i, n) in grid.nodes().iter().enumerate() {
            if n.class != NodeClass::Regular {
                continue;
            }
            let row = laplacian_row(&grid, i).unwrap();
            let got = row.eval(&u);
            let scale = row.diag * u.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
            assert!((got - exact).abs() <= 1e-10 * scale, "{got} vs {exact}");
        }
    }
}

#[test]
fn interior_rows_have_nonnegative_weights_summing_to_the_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..300 {
        let d = random_box(&mut rng);
        let depth = rng.random_range(1..7);
        let grid = random_grid(&mut rng, d, depth);
        for (i, n) in grid.nodes().iter().enumerate() {
            if n.class == NodeClass::Boundary {
                continue;
            }
            let row = laplacian_row(&grid, i).unwrap();
            assert!(row.terms.iter().all(|t| t.1 >= 0.0), "{row:?}");
            assert!(row.terms.iter().all(|t| t.0 != i));
            assert!((row.weight_sum() - row.diag).abs() <= 1e-12 * row.diag);
            assert_eq!(row.constant, 0.0);
        }
    }
}

#[test]
fn residuals_are_degenerate_elliptic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut probes = 0;
    for _ in 0..10_000 {
        let d = random_box(&mut rng);
        let depth = rng.random_range(1..5);
        let grid = random_grid(&mut rng, d, depth);
        let op = random_operator(&mut rng, &grid);
        let u = random_state(&mut rng, grid.len());
        let active = op.active_nodes();
        if active.is_empty() {
            continue;
        }
        let i = active[rng.random_range(0..active.len())];
        let f0 = op.residual_at(i, &u);
        let tol = 1e-9 * (1.0 + f0.abs());
        let delta = rng.random_range(1e-3..0.5);
        let mut v = u.clone();
        v[i] += delta;
        assert!(op.residual_at(i, &v) >= f0 - tol, "{} at node {i}: own value up lowered F", op.name());
        let mut cols: Vec<usize> = op.jacobian_row_at(i, &u).iter().map(|e| e.0).collect();
        cols.extend((0..3).map(|_| rng.random_range(0..grid.len())));
        for j in cols.into_iter().filter(|&j| j != i) {
            let mut w = u.clone();
            w[j] += delta;
            assert!(
                op.residual_at(i, &w) <= f0 + tol,
                "{} at node {i}: neighbor {j} up raised F",
                op.name()
            );
            probes += 1;
        }
    }
    assert!(probes > 10_000);
}

#[test]
fn jacobian_matches_finite_differences_away_from_kinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    for _ in 0..400 {
        let d = random_box(&mut rng);
        let depth = rng.random_range(1..5);
        let grid = random_grid(&mut rng, d, depth);
        let op = random_operator(&mut rng, &grid);
        let u: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for i in op.active_nodes() {
            let mut row = op.jacobian_row_at(i, &u);
            row.sort_by_key(|e| e.0);
            let mut dense: Vec<(usize, f64)> = Vec::new();
            for (j, v) in row {
                match dense.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => dense.push((j, v)),
                }
            }
            let eps = 1e-7;
            let f0 = op.residual_at(i, &u);
            let mut support: Vec<usize> = dense.iter().map(|e| e.0).collect();
            support.push(rng.random_range(0..grid.len()));
            for j in support {
                let mut up = u.clone();
                up[j] += eps;
                let mut dn = u.clone();
                dn[j] -= eps;
                let fwd = (op.residual_at(i, &up) - f0) / eps;
                let bwd = (f0 - op.residual_at(i, &dn)) / eps;
                let scale = 1.0 + fwd.abs().max(bwd.abs());
                if (fwd - bwd).abs() > 1e-4 * scale {
                    continue; // a kink: any one-sided value is a valid generalized derivative
                }
                let want = dense.iter().find(|e| e.0 == j).map_or(0.0, |e| e.1);
                assert!((want - fwd).abs() <= 1e-4 * scale, "{}: d F_{i} / d u_{j} = {want}, fd {fwd}", op.name());
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn ordered_data_give_ordered_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..100 {
        let d = DomainBox::unit();
        let depth = rng.random_range(2..5);
        let grid = random_grid(&mut rng, d, depth);
        let (cx, cy, r) = (rng.random_range(0.3..0.7), rng.random_range(0.3..0.7), rng.random_range(0.15..0.45));
        let a = rng.random_range(-5.0..5.0);
        let b = rng.random_range(-2.0..2.0);
        let df = rng.random_range(0.0..3.0);
        let dg = rng.random_range(0.0..1.0);
        let make = |lift_f: f64, lift_g: f64| {
            ProblemDefinition::new(
                field(move |x, y| a * (3.0 * x).sin() * y + lift_f * x),
                field(move |x, y| b * x - y + lift_g * (1.0 + x * y)),
            )
            .with_indicator(move |x, y| (x - cx).hypot(y - cy) < r)
        };
        let solve = |p: &ProblemDefinition| {
            let op = instantiate_builtin(OperatorKind::BcComposite, p, &grid).unwrap();
            newton_to_tolerance(&op, &grid, &GridFunction::zeros(&grid), 1e-11, 5).unwrap().u
        };
        let lo = solve(&make(0.0, 0.0));
        let hi = solve(&make(df, dg));
        for (k, (l, h)) in lo.values().iter().zip(hi.values()).enumerate() {
            assert!(*l <= h + 1e-10, "case {case}, node {k}: {l} > {h}");
        }
    }
}
