//! Level-set extraction on quadtree leaves.
//!
//! Each leaf is split into a fan of triangles around its centre, using the
//! leaf's corners and any hanging nodes on its edges, so neighboring leaves
//! of different size share exactly the same boundary segments. The centre
//! takes the mean of the four corner values. Crossings are computed per edge
//! in a canonical orientation, which makes shared crossings bit-identical
//! and lets segments be stitched by exact coordinates.

use std::collections::HashMap;

use crate::error::Result;
use crate::function::GridFunction;
use crate::grid::QuadtreeGrid;

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    /// First and last points coincide logically (not repeated).
    pub closed: bool,
}

type Key = (u64, u64);

fn key(p: (f64, f64)) -> Key {
    // normalize -0.0 so equal coordinates share a key
    ((p.0 + 0.0).to_bits(), (p.1 + 0.0).to_bits())
}

#[derive(Clone, Copy)]
struct Vertex {
    p: (f64, f64),
    v: f64,
}

fn crossing(a: Vertex, b: Vertex, level: f64) -> (f64, f64) {
    // canonical orientation: interpolate from the lexicographically smaller end
    let (a, b) = if (a.p.0, a.p.1) <= (b.p.0, b.p.1) { (a, b) } else { (b, a) };
    if a.v == level {
        return a.p;
    }
    if b.v == level {
        return b.p;
    }
    let t = (level - a.v) / (b.v - a.v);
    (a.p.0 + t * (b.p.0 - a.p.0), a.p.1 + t * (b.p.1 - a.p.1))
}

fn triangle_segment(tri: [Vertex; 3], level: f64) -> Option<((f64, f64), (f64, f64))> {
    let inside = tri.map(|v| v.v > level);
    let n_in = inside.iter().filter(|&&b| b).count();
    if n_in == 0 || n_in == 3 {
        return None;
    }
    // the lone vertex differs from the other two
    let lone = (0..3).find(|&k| inside[k] != inside[(k + 1) % 3] && inside[k] != inside[(k + 2) % 3])?;
    let a = tri[lone];
    let b = tri[(lone + 1) % 3];
    let c = tri[(lone + 2) % 3];
    let p = crossing(a, b, level);
    let q = crossing(a, c, level);
    (key(p) != key(q)).then_some((p, q))
}

/// Segments of `{value = level}` over all leaves.
fn segments(grid: &QuadtreeGrid, values: &[f64], level: f64) -> Vec<((f64, f64), (f64, f64))> {
    let mut out = Vec::new();
    for c in grid.leaves() {
        let s = c.side();
        let h = s / 2;
        let ring: Vec<(u32, u32)> = [
            (c.i, c.j),
            (c.i + h, c.j),
            (c.i + s, c.j),
            (c.i + s, c.j + h),
            (c.i + s, c.j + s),
            (c.i + h, c.j + s),
            (c.i, c.j + s),
            (c.i, c.j + h),
        ]
        .into_iter()
        .enumerate()
        .filter(|&(k, _)| k % 2 == 0 || s > 1)
        .map(|(_, p)| p)
        .collect();
        let verts: Vec<Vertex> = ring
            .iter()
            .filter_map(|&(i, j)| {
                let id = grid.node_at(i, j)?;
                let n = grid.node(id);
                Some(Vertex {
                    p: (n.x, n.y),
                    v: values[id],
                })
            })
            .collect();
        let corners: Vec<f64> = c
            .corners()
            .iter()
            .filter_map(|q| grid.node_at(q.i, q.j).map(|id| values[id]))
            .collect();
        let (x0, y0, x1, y1) = grid.cell_rect(c);
        let centre = Vertex {
            p: (0.5 * (x0 + x1), 0.5 * (y0 + y1)),
            v: corners.iter().sum::<f64>() / corners.len() as f64,
        };
        for k in 0..verts.len() {
            let tri = [centre, verts[k], verts[(k + 1) % verts.len()]];
            if let Some(seg) = triangle_segment(tri, level) {
                out.push(seg);
            }
        }
    }
    out
}

fn stitch(segs: Vec<((f64, f64), (f64, f64))>) -> Vec<Polyline> {
    let mut at: HashMap<Key, Vec<usize>> = HashMap::new();
    for (s, (p, q)) in segs.iter().enumerate() {
        at.entry(key(*p)).or_default().push(s);
        at.entry(key(*q)).or_default().push(s);
    }
    let mut used = vec![false; segs.len()];
    let other = |s: usize, k: Key| if key(segs[s].0) == k { segs[s].1 } else { segs[s].0 };
    let walk = |start: usize, from: (f64, f64), used: &mut Vec<bool>| -> Polyline {
        used[start] = true;
        let mut pts = vec![from];
        let mut cur = other(start, key(from));
        loop {
            pts.push(cur);
            let k = key(cur);
            let next = at[&k].iter().copied().find(|&s| !used[s]);
            match next {
                Some(s) => {
                    used[s] = true;
                    cur = other(s, k);
                }
                None => break,
            }
        }
        let closed = pts.len() > 2 && key(pts[0]) == key(*pts.last().unwrap());
        if closed {
            pts.pop();
        }
        Polyline { points: pts, closed }
    };
    let mut out = Vec::new();
    // open curves start at endpoints of odd degree
    let mut ends: Vec<(Key, usize)> = at
        .iter()
        .filter(|(_, v)| v.len() % 2 == 1)
        .map(|(k, v)| (*k, v[0]))
        .collect();
    ends.sort();
    for (k, s) in ends {
        if let Some(s) = std::iter::once(s).chain(at[&k].iter().copied()).find(|&s| !used[s]) {
            let from = if key(segs[s].0) == k { segs[s].0 } else { segs[s].1 };
            out.push(walk(s, from, &mut used));
        }
    }
    for s in 0..segs.len() {
        if !used[s] {
            out.push(walk(s, segs[s].0, &mut used));
        }
    }
    out
}

/// Polylines of `{u = level}`, with inside meaning `u > level`. A level
/// outside the range of `u` yields no curves.
pub fn extract_contour(grid: &QuadtreeGrid, u: &GridFunction, level: f64) -> Result<Vec<Polyline>> {
    u.check(grid)?;
    Ok(stitch(segments(grid, u.values(), level)))
}

fn point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn segments_of(lines: &[Polyline]) -> Vec<((f64, f64), (f64, f64))> {
    let mut out = Vec::new();
    for l in lines {
        let n = l.points.len();
        if n == 1 {
            out.push((l.points[0], l.points[0]));
        }
        for k in 1..n {
            out.push((l.points[k - 1], l.points[k]));
        }
        if l.closed && n > 2 {
            out.push((l.points[n - 1], l.points[0]));
        }
    }
    out
}

fn directed(a: &[Polyline], b: &[Polyline]) -> f64 {
    let segs = segments_of(b);
    let mut worst: f64 = 0.0;
    for (p, q) in segments_of(a) {
        // sample each segment so long edges are not under-resolved
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let x = (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1));
            let d = segs
                .iter()
                .map(|&(s, e)| point_segment(x, s, e))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

/// Symmetric Hausdorff distance between two sets of polylines; 0 when both
/// are empty and `+∞` when exactly one is.
pub fn hausdorff(a: &[Polyline], b: &[Polyline]) -> f64 {
    match (a.iter().all(|l| l.points.is_empty()), b.iter().all(|l| l.points.is_empty())) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => directed(a, b).max(directed(b, a)),
    }
}
