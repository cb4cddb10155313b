//! CSV and SVG artifacts, written atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::contour::Polyline;
use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::{NodeClass, QuadtreeGrid};
use crate::solvers::{SolveRecord, SolverLogEntry};

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn solution_csv(grid: &QuadtreeGrid, u: &GridFunction) -> String {
    let mut s = String::from("i,j,x,y,u\n");
    for (n, v) in grid.nodes().iter().zip(u.values()) {
        let _ = writeln!(s, "{},{},{},{},{}", n.index.i, n.index.j, n.x, n.y, v);
    }
    s
}

/// `(i, j, u)` rows of a solution CSV.
pub fn parse_solution_csv(text: &str) -> Result<Vec<(u32, u32, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "i,j,x,y,u" => {}
        _ => return Err(Error::Input("solution CSV must start with `i,j,x,y,u`".into())),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            let bad = || Error::Input(format!("solution CSV line {}: `{l}`", n + 2));
            if f.len() != 5 {
                return Err(bad());
            }
            Ok((
                f[0].parse().map_err(|_| bad())?,
                f[1].parse().map_err(|_| bad())?,
                f[4].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

/// Match parsed solution rows to the nodes of `grid`.
pub fn solution_from_rows(grid: &QuadtreeGrid, rows: &[(u32, u32, f64)]) -> Result<GridFunction> {
    let mut vals = vec![f64::NAN; grid.len()];
    for &(i, j, v) in rows {
        let id = grid
            .node_at(i, j)
            .ok_or_else(|| Error::Input(format!("solution row ({i}, {j}) is not a grid node")))?;
        vals[id] = v;
    }
    if let Some(k) = vals.iter().position(|v| v.is_nan()) {
        let n = grid.node(k);
        return Err(Error::Input(format!(
            "solution has no value for node ({}, {})",
            n.index.i, n.index.j
        )));
    }
    GridFunction::new(grid, vals)
}

pub fn contour_csv(lines: &[Polyline]) -> String {
    let mut s = String::from("curve_id,seq,x,y\n");
    for (c, l) in lines.iter().enumerate() {
        for (k, p) in l.points.iter().enumerate() {
            let _ = writeln!(s, "{c},{k},{},{}", p.0, p.1);
        }
        if l.closed {
            if let Some(p) = l.points.first() {
                let _ = writeln!(s, "{c},{},{},{}", l.points.len(), p.0, p.1);
            }
        }
    }
    s
}

pub fn log_csv(log: &[SolverLogEntry]) -> String {
    let mut s = String::from("iteration,residual,node_count,wall_time\n");
    for e in log {
        let _ = writeln!(s, "{},{:e},{},{:.6}", e.iteration, e.residual, e.node_count, e.wall_time);
    }
    s
}

pub fn solves_csv(solves: &[SolveRecord]) -> String {
    let mut s = String::from("stage,allowed_scale,nodes,iterations,residual\n");
    for r in solves {
        let _ = writeln!(
            s,
            "{},{},{},{},{:e}",
            r.stage, r.allowed_scale, r.nodes, r.iterations, r.residual
        );
    }
    s
}

fn class_name(c: NodeClass) -> &'static str {
    match c {
        NodeClass::Regular => "regular",
        NodeClass::DanglingX => "dangling-x",
        NodeClass::DanglingY => "dangling-y",
        NodeClass::Boundary => "boundary",
    }
}

/// Blue (low) to red (high).
fn colour(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs()) * 0.8).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// SVG of the leaves (shaded by the mean corner value of `u` if given),
/// one marker per node tagged with its class, and optional contours.
pub fn render_svg(grid: &QuadtreeGrid, u: Option<&GridFunction>, contours: &[Polyline]) -> String {
    let d = grid.domain();
    let scale = 800.0 / d.width().max(d.height());
    let (w, h) = (d.width() * scale, d.height() * scale);
    let px = |x: f64| (x - d.x_min) * scale;
    let py = |y: f64| (d.y_max - y) * scale;
    let (lo, hi) = u
        .map(|u| {
            u.values()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)))
        })
        .unwrap_or((0.0, 1.0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.3} {h:.3}">"#
    );
    let _ = writeln!(s, r#"<g id="leaves" stroke="black" stroke-width="0.3">"#);
    for c in grid.leaves() {
        let (x0, y0, x1, y1) = grid.cell_rect(c);
        let fill = match u {
            Some(u) => {
                let vals: Vec<f64> = c
                    .corners()
                    .iter()
                    .filter_map(|q| grid.node_at(q.i, q.j).map(|k| u[k]))
                    .collect();
                let m = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
                colour(if hi > lo { (m - lo) / (hi - lo) } else { 0.5 })
            }
            None => "none".into(),
        };
        let _ = writeln!(
            s,
            r#"<rect class="leaf" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
            px(x0),
            py(y1),
            (x1 - x0) * scale,
            (y1 - y0) * scale
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="nodes">"#);
    let rad = (0.25 * grid.unit().0.min(grid.unit().1) * scale).clamp(0.2, 2.0);
    for n in grid.nodes() {
        let _ = writeln!(
            s,
            r#"<circle class="node {}" cx="{:.3}" cy="{:.3}" r="{rad:.2}"/>"#,
            class_name(n.class),
            px(n.x),
            py(n.y)
        );
    }
    let _ = writeln!(s, "</g>");
    if !contours.is_empty() {
        let _ = writeln!(s, r#"<g id="contours" fill="none" stroke="black" stroke-width="1.5">"#);
        for l in contours {
            let pts: Vec<String> = l.points.iter().map(|p| format!("{:.3},{:.3}", px(p.0), py(p.1))).collect();
            let tag = if l.closed { "polygon" } else { "polyline" };
            let _ = writeln!(s, r#"<{tag} class="contour" points="{}"/>"#, pts.join(" "));
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(
        s,
        r#"<style>.regular{{fill:black}} .dangling-x{{fill:red}} .dangling-y{{fill:orange}} .boundary{{fill:blue}}</style>"#
    );
    s.push_str("</svg>\n");
    s
}
