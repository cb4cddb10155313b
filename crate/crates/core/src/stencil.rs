//! Degenerate elliptic stencils on a classified quadtree grid.
//!
//! Every linear row is stored as `w̄ u_i - Σ w_j u_j + constant` with
//! `w_j >= 0`, so it is nondecreasing in `u_i` and in each `u_i - u_j`.

use crate::error::{Error, Result};
use crate::grid::{Direction, GridNode, NodeClass, QuadtreeGrid};

/// One node's linear discretization.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilRow {
    pub center: usize,
    /// Reference weight `w̄`.
    pub diag: f64,
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl StencilRow {
    pub fn new(center: usize) -> Self {
        StencilRow {
            center,
            diag: 0.0,
            terms: Vec::new(),
            constant: 0.0,
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        let s: f64 = self.terms.iter().map(|&(j, w)| w * u[j]).sum();
        self.diag * u[self.center] - s + self.constant
    }

    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.1).sum()
    }

    fn push(&mut self, node: usize, w: f64) {
        self.diag += w;
        self.add_term(node, w);
    }

    fn add_term(&mut self, node: usize, w: f64) {
        if let Some(t) = self.terms.iter_mut().find(|t| t.0 == node) {
            t.1 += w;
        } else {
            self.terms.push((node, w));
        }
    }
}

/// A one-sided neighbor value: the weighted average `Σ w_j u_j` at
/// distance `dist`. Weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct OneSided {
    pub terms: Vec<(usize, f64)>,
    pub dist: f64,
}

impl OneSided {
    pub fn value(&self, u: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, w)| w * u[j]).sum()
    }

    /// `(Σ w_j u_j - u_i) / dist`
    pub fn slope(&self, u: &[f64], ui: f64) -> f64 {
        (self.value(u) - ui) / self.dist
    }
}

/// Neighbor value on side `side` of node `id`: the direct neighbor, or at a
/// hanging node the average of the two far coarse-cell vertices.
pub fn one_sided(grid: &QuadtreeGrid, id: usize, side: Direction) -> Option<OneSided> {
    let n = grid.node(id);
    if let Some(nb) = n.neighbor(side) {
        return Some(OneSided {
            terms: vec![(nb.node, 1.0)],
            dist: nb.dist,
        });
    }
    match n.dangling {
        Some(d) if d.missing == side => Some(OneSided {
            terms: vec![(d.far_pair[0], 0.5), (d.far_pair[1], 0.5)],
            dist: d.far_dist,
        }),
        _ => None,
    }
}

/// Upwind first derivative. `dir = East` approximates `+∂x u` by
/// `(u_i - u_W) / Δ_W`, `dir = West` approximates `-∂x u` by
/// `(u_i - u_E) / Δ_E`, and likewise in y.
pub fn upwind_first_derivative(
    grid: &QuadtreeGrid,
    id: usize,
    dir: Direction,
    u: &[f64],
) -> Result<f64> {
    let s = one_sided(grid, id, dir.opposite()).ok_or_else(|| Error::StencilUnavailable {
        node: id,
        reason: format!("no neighbor {:?} of node", dir.opposite()),
    })?;
    Ok((u[id] - s.value(u)) / s.dist)
}

/// `-∂²` along one axis from an equidistant pair: `(2u - u_+ - u_-)/d²`.
fn pair_term(row: &mut StencilRow, node: &GridNode, x_axis: bool) -> bool {
    let pair = if x_axis { node.pair_x } else { node.pair_y };
    match pair {
        Some(p) => {
            let w = 1.0 / (p.dist * p.dist);
            row.push(p.plus, w);
            row.push(p.minus, w);
            true
        }
        None => false,
    }
}

/// Three-point `-∂²` with unequal arms (first order, still monotone).
fn nonuniform_term(row: &mut StencilRow, node: &GridNode, plus: Direction) -> bool {
    match (node.neighbor(plus), node.neighbor(plus.opposite())) {
        (Some(a), Some(b)) => {
            let s = a.dist + b.dist;
            row.push(a.node, 2.0 / (a.dist * s));
            row.push(b.node, 2.0 / (b.dist * s));
            true
        }
        _ => false,
    }
}

/// Laplacian row (encoding `-Δu`) at an interior node.
///
/// Regular nodes use the nearest equidistant opposing pairs. Hanging nodes
/// use the I-stencil, widened by the smallest factor keeping the axis
/// weight nonnegative.
pub fn laplacian_row(grid: &QuadtreeGrid, id: usize) -> Result<StencilRow> {
    let node = grid.node(id);
    let mut row = StencilRow::new(id);
    match node.class {
        NodeClass::Regular => {
            if !pair_term(&mut row, node, true) || !pair_term(&mut row, node, false) {
                return Err(Error::Invariant(format!("regular node {id} lacks a pair")));
            }
        }
        NodeClass::DanglingX | NodeClass::DanglingY => i_stencil(grid, id, &mut row)?,
        NodeClass::Boundary => {
            return Err(Error::StencilUnavailable {
                node: id,
                reason: "boundary node needs boundary data".into(),
            })
        }
    }
    Ok(row)
}

fn i_stencil(grid: &QuadtreeGrid, id: usize, row: &mut StencilRow) -> Result<()> {
    let node = grid.node(id);
    let info = node
        .dangling
        .ok_or_else(|| Error::Invariant(format!("node {id} has no hanging-node data")))?;
    let x_missing = info.missing.is_x();
    let (ux, uy) = grid.unit();
    // "across" is the axis of the missing neighbor, "along" the coarse edge
    let (along_plus, u_across, u_along) = if x_missing {
        (Direction::North, ux, uy)
    } else {
        (Direction::East, uy, ux)
    };
    let a = node.neighbor(along_plus);
    let b = node.neighbor(along_plus.opposite());
    let (a, b) = match (a, b) {
        (Some(a), Some(b)) if a.lattice == b.lattice => (a, b),
        _ => {
            return Err(Error::Invariant(format!(
                "hanging node {id} lacks equal neighbors along its edge"
            )))
        }
    };
    let full = 1u32 << info.coarse_scale;
    let half = a.lattice;
    let d_along = half as f64 * u_along;
    // smallest m with d_along <= m * full * u_across
    let mut m = 1u32;
    while d_along > (m * full) as f64 * u_across * (1.0 + 1e-12) {
        m += 1;
    }
    let d_across = (m * full) as f64 * u_across;
    let (pi, pj) = (node.index.i as i64, node.index.j as i64);
    let reach = (m * full) as i64;
    let h = half as i64;
    let mut diag = Vec::with_capacity(4);
    for s1 in [-1i64, 1] {
        for s2 in [-1i64, 1] {
            let (qi, qj) = if x_missing {
                (pi + s1 * reach, pj + s2 * h)
            } else {
                (pi + s2 * h, pj + s1 * reach)
            };
            let q = grid.node_at_signed(qi, qj).ok_or_else(|| {
                Error::Invariant(format!(
                    "widened stencil (m = {m}) at node {id} needs missing vertex ({qi}, {qj})"
                ))
            })?;
            diag.push(q);
        }
    }
    let wd = 0.5 / (d_across * d_across);
    for q in diag {
        row.push(q, wd);
    }
    let wa = 1.0 / (d_along * d_along) - 1.0 / (d_across * d_across);
    if wa < -1e-12 * row.diag {
        return Err(Error::Invariant(format!("negative I-stencil weight at node {id}")));
    }
    let wa = wa.max(0.0);
    if wa > 0.0 {
        row.push(a.node, wa);
        row.push(b.node, wa);
    }
    Ok(())
}

/// Robin data `A u_n + B u = C` with `n` the outward normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Robin {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Robin {
    pub fn dirichlet(value: f64) -> Self {
        Robin {
            a: 0.0,
            b: 1.0,
            c: value,
        }
    }

    pub fn neumann(flux: f64) -> Self {
        Robin {
            a: 1.0,
            b: 0.0,
            c: flux,
        }
    }
}

/// Discretization at a boundary node.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryRow {
    /// Value fixed to `C / B`; the node is inactive.
    Pinned(f64),
    Row(StencilRow),
}

/// Boundary row from Robin data given per wall and position.
///
/// On each wall axis the outward derivative comes from the boundary
/// condition and the inward one from the nearest interior neighbor at
/// distance `Δ`, giving `(2/Δ)[(u - u_in)/Δ + (B u - C)/A]`. Along the wall
/// the usual centered second difference is used.
pub fn robin_row(
    grid: &QuadtreeGrid,
    id: usize,
    data: &dyn Fn(Direction, f64, f64) -> Robin,
) -> Result<BoundaryRow> {
    let node = grid.node(id);
    if node.walls.is_empty() {
        return Err(Error::StencilUnavailable {
            node: id,
            reason: "not a boundary node".into(),
        });
    }
    let mut walls = node.walls.clone();
    walls.sort_by_key(|w| match w {
        Direction::West => 0,
        Direction::East => 1,
        Direction::South => 2,
        Direction::North => 3,
    });
    let coeffs: Vec<(Direction, Robin)> =
        walls.iter().map(|&w| (w, data(w, node.x, node.y))).collect();
    for &(_, r) in &coeffs {
        if r.a == 0.0 {
            if r.b == 0.0 {
                return Err(Error::IllPosedBoundary {
                    node: id,
                    reason: "A = B = 0".into(),
                });
            }
            return Ok(BoundaryRow::Pinned(r.c / r.b));
        }
    }
    let mut row = StencilRow::new(id);
    let mut x_done = false;
    let mut y_done = false;
    for &(wall, r) in &coeffs {
        let ratio = r.b / r.a;
        if !ratio.is_finite() || ratio < 0.0 {
            return Err(Error::IllPosedBoundary {
                node: id,
                reason: format!("B/A = {ratio} is not a nonnegative number"),
            });
        }
        let inner = node.neighbor(wall.opposite()).ok_or_else(|| Error::StencilUnavailable {
            node: id,
            reason: "no interior neighbor".into(),
        })?;
        let d = inner.dist;
        row.push(inner.node, 2.0 / (d * d));
        row.diag += 2.0 * ratio / d;
        row.constant -= 2.0 * r.c / (r.a * d);
        if wall.is_x() {
            x_done = true;
        } else {
            y_done = true;
        }
    }
    for (done, x_axis, plus) in [(x_done, true, Direction::East), (y_done, false, Direction::North)] {
        if done {
            continue;
        }
        if !pair_term(&mut row, node, x_axis) && !nonuniform_term(&mut row, node, plus) {
            return Err(Error::StencilUnavailable {
                node: id,
                reason: "no neighbors along the wall".into(),
            });
        }
    }
    Ok(BoundaryRow::Row(row))
}

/// Upwind candidates for the squared gradient, grouped by axis.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientStencil {
    pub center: usize,
    pub axes: [Vec<OneSided>; 2],
}

impl GradientStencil {
    pub fn build(grid: &QuadtreeGrid, id: usize) -> Self {
        let side = |d| one_sided(grid, id, d);
        let x: Vec<OneSided> = [Direction::East, Direction::West]
            .into_iter()
            .filter_map(side)
            .collect();
        let y: Vec<OneSided> = [Direction::North, Direction::South]
            .into_iter()
            .filter_map(side)
            .collect();
        GradientStencil {
            center: id,
            axes: [x, y],
        }
    }

    /// Per axis, the index of the steepest ascending candidate and its
    /// slope, if positive.
    pub fn active(&self, u: &[f64]) -> [Option<(usize, f64)>; 2] {
        let ui = u[self.center];
        self.axes.each_ref().map(|cands| {
            let mut best: Option<(usize, f64)> = None;
            for (k, c) in cands.iter().enumerate() {
                let s = c.slope(u, ui);
                if s > 0.0 && best.is_none_or(|b| s > b.1) {
                    best = Some((k, s));
                }
            }
            best
        })
    }

    /// `Σ_axes max(0, max_j (u_j - u_i)/Δ_j)²`
    pub fn value(&self, u: &[f64]) -> f64 {
        self.active(u).iter().flatten().map(|(_, s)| s * s).sum()
    }

    /// Largest `Σ_axes 2 s_a / Δ_a` over the active candidates: the
    /// derivative of the value with respect to `u_i`, up to sign.
    pub fn lipschitz(&self, u: &[f64]) -> f64 {
        let act = self.active(u);
        act.iter()
            .zip(&self.axes)
            .filter_map(|(a, cands)| a.map(|(k, s)| 2.0 * s / cands[k].dist))
            .sum()
    }
}

/// Upwind squared gradient, used inside `-|Du|²`.
pub fn upwind_gradient_sq(grid: &QuadtreeGrid, id: usize, u: &[f64]) -> f64 {
    GradientStencil::build(grid, id).value(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_quadtree, DomainBox, ScaleRequest};

    fn interior(g: &QuadtreeGrid) -> impl Iterator<Item = usize> + '_ {
        (0..g.len()).filter(|&i| g.node(i).class != NodeClass::Boundary)
    }

    #[test]
    fn uniform_laplacian_of_paraboloid() {
        let g = QuadtreeGrid::uniform(DomainBox::unit(), 4, 3).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|n| n.x * n.x + n.y * n.y).collect();
        for i in interior(&g) {
            let r = laplacian_row(&g, i).unwrap();
            assert!((r.eval(&u) + 4.0).abs() < 1e-10);
            assert!((r.diag - r.weight_sum()).abs() <= 1e-12 * r.diag);
        }
    }

    #[test]
    fn dangling_rows_are_monotone_and_exact_on_quadratics() {
        let d = DomainBox::new(0.0, 1.0, 0.0, 3.0).unwrap();
        let g = build_quadtree(d, 5, d.default_pads(), &[ScaleRequest::new(0.3, 1.4, 1)]).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|n| n.x * n.x - 0.5 * n.y * n.y + n.x * n.y).collect();
        let mut seen = 0;
        for i in interior(&g) {
            let r = laplacian_row(&g, i).unwrap();
            assert!(r.terms.iter().all(|t| t.1 >= 0.0));
            assert!((r.diag - r.weight_sum()).abs() <= 1e-12 * r.diag);
            if g.node(i).dangling.is_some() {
                seen += 1;
                // the I-stencil is exact on quadratics without an xy term
                let v: Vec<f64> = g.nodes().iter().map(|n| n.x * n.x + 3.0 * n.y * n.y).collect();
                assert!((r.eval(&v) + 8.0).abs() < 1e-8, "{}", r.eval(&v));
                let _ = r.eval(&u);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn first_derivatives() {
        let g = QuadtreeGrid::uniform(DomainBox::unit(), 3, 2).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|n| n.x).collect();
        let c = vec![2.5; g.len()];
        for i in interior(&g) {
            assert!((upwind_first_derivative(&g, i, Direction::East, &u).unwrap() - 1.0).abs() < 1e-14);
            assert!((upwind_first_derivative(&g, i, Direction::West, &u).unwrap() + 1.0).abs() < 1e-14);
            for dir in Direction::ALL {
                assert_eq!(upwind_first_derivative(&g, i, dir, &c).unwrap(), 0.0);
            }
        }
        let corner = g.node_at(0, 0).unwrap();
        assert!(upwind_first_derivative(&g, corner, Direction::East, &u).is_err());
    }

    #[test]
    fn gradient_sq_on_linear() {
        let g = QuadtreeGrid::uniform(DomainBox::unit(), 3, 3).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|n| n.x).collect();
        for i in interior(&g) {
            assert!((upwind_gradient_sq(&g, i, &u) - 1.0).abs() < 1e-12);
            assert_eq!(upwind_gradient_sq(&g, i, &vec![1.0; g.len()]), 0.0);
        }
    }

    #[test]
    fn robin_variants() {
        let g = QuadtreeGrid::uniform(DomainBox::unit(), 3, 2).unwrap();
        let w = g.node_at(0, 4).unwrap();
        match robin_row(&g, w, &|_, _, y| Robin::dirichlet(y)).unwrap() {
            BoundaryRow::Pinned(v) => assert_eq!(v, 0.5),
            _ => panic!("expected a pin"),
        }
        let neu = robin_row(&g, w, &|_, _, _| Robin::neumann(0.0)).unwrap();
        let BoundaryRow::Row(r) = neu else { panic!() };
        assert!(r.eval(&vec![3.0; g.len()]).abs() < 1e-12);
        assert!(robin_row(&g, w, &|_, _, _| Robin { a: 0.0, b: 0.0, c: 1.0 }).is_err());
        assert!(robin_row(&g, w, &|_, _, _| Robin { a: 1.0, b: -1.0, c: 0.0 }).is_err());
    }

    #[test]
    fn robin_row_matches_hand_assembly() {
        // west wall node of a uniform h = 1/4 grid with A = 1, B = 2, C = 3
        let g = QuadtreeGrid::uniform(DomainBox::unit(), 3, 2).unwrap();
        let w = g.node_at(0, 4).unwrap();
        let BoundaryRow::Row(r) =
            robin_row(&g, w, &|_, _, _| Robin { a: 1.0, b: 2.0, c: 3.0 }).unwrap()
        else {
            panic!()
        };
        let h = 0.25;
        let e = g.node_at(2, 4).unwrap();
        let n = g.node_at(0, 6).unwrap();
        let s = g.node_at(0, 2).unwrap();
        let expect_diag = 2.0 / (h * h) + 4.0 / h + 2.0 / (h * h);
        assert!((r.diag - expect_diag).abs() < 1e-9);
        assert!((r.constant + 6.0 / h).abs() < 1e-12);
        let get = |k| r.terms.iter().find(|t| t.0 == k).unwrap().1;
        assert!((get(e) - 2.0 / (h * h)).abs() < 1e-9);
        assert!((get(n) - 1.0 / (h * h)).abs() < 1e-9);
        assert!((get(s) - 1.0 / (h * h)).abs() < 1e-9);
    }
}
