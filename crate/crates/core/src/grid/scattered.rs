use std::collections::BTreeMap;

use spade::{DelaunayTriangulation, FloatTriangulation, HasPosition, Point2, Triangulation};

use super::{snap_to_lattice, DomainBox, QuadtreeGrid, VirtualIndex};
use crate::error::{Error, Result};
use crate::function::GridFunction;

struct Sample {
    pos: Point2<f64>,
    value: f64,
}

impl HasPosition for Sample {
    type Scalar = f64;
    fn position(&self) -> Point2<f64> {
        self.pos
    }
}

/// Alignment exponent of a lattice point: the largest `k <= depth` with
/// `2^k` dividing both coordinates.
pub(crate) fn alignment(p: VirtualIndex, depth: u32) -> u32 {
    let tz = |v: u32| if v == 0 { depth } else { v.trailing_zeros().min(depth) };
    tz(p.i).min(tz(p.j))
}

/// Smallest quadtree on which every data point is a node, with the data
/// linearly interpolated (Delaunay barycentric) onto the remaining nodes.
///
/// Each point is requested at its own alignment scale, so every cell
/// touching it has the point as a corner. Nodes outside the convex hull of
/// the data take the value of the nearest data point.
pub fn init_from_scattered(
    domain: DomainBox,
    depth: u32,
    points: &[(f64, f64, f64)],
) -> Result<(QuadtreeGrid, GridFunction)> {
    if points.is_empty() {
        return Err(Error::Input("no data points".into()));
    }
    let mut data: BTreeMap<VirtualIndex, f64> = BTreeMap::new();
    for &(x, y, v) in points {
        if !domain.contains(x, y) {
            return Err(Error::OutsideDomain { x, y });
        }
        if !v.is_finite() {
            return Err(Error::Input(format!("non-finite value at ({x}, {y})")));
        }
        let p = snap_to_lattice(&domain, depth, x, y);
        if let Some(old) = data.insert(p, v) {
            if old != v {
                return Err(Error::Input(format!(
                    "conflicting values {old} and {v} at lattice point ({}, {})",
                    p.i, p.j
                )));
            }
        }
    }
    let reqs: Vec<(u32, u32, u32)> = data
        .keys()
        .map(|p| (p.i, p.j, alignment(*p, depth)))
        .collect();
    let grid = QuadtreeGrid::build_lattice(domain, depth, domain.default_pads(), &reqs, &[])?;

    let mut tri: DelaunayTriangulation<Sample> = DelaunayTriangulation::new();
    for (p, v) in &data {
        let (x, y) = grid.position(p.i, p.j);
        tri.insert(Sample {
            pos: Point2::new(x, y),
            value: *v,
        })
        .map_err(|e| Error::Input(format!("cannot triangulate data: {e:?}")))?;
    }
    let interp = tri.barycentric();
    let values = grid
        .nodes()
        .iter()
        .map(|n| {
            if let Some(v) = data.get(&n.index) {
                return *v;
            }
            let q = Point2::new(n.x, n.y);
            interp
                .interpolate(|h| h.data().value, q)
                .or_else(|| tri.nearest_neighbor(q).map(|h| h.data().value))
                .unwrap_or(0.0)
        })
        .collect();
    let f = GridFunction::new(&grid, values)?;
    Ok((grid, f))
}
