//! Shared fixtures for the benchmarks.

use quadfd::grid::{build_quadtree, DomainBox, QuadtreeGrid, ScaleRequest};

/// Finest-scale requests spaced one fine cell apart along the circle of
/// radius `r` about the centre of the unit square.
pub fn circle_requests(depth: u32, r: f64) -> Vec<ScaleRequest> {
    let h = 1.0 / (1u32 << depth) as f64;
    let n = (2.0 * std::f64::consts::PI * r / h).ceil() as usize;
    (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            ScaleRequest::new(0.5 + r * t.cos(), 0.5 + r * t.sin(), 0)
        })
        .collect()
}

/// A grid refined to the finest scale along a circle, graded outwards.
pub fn circle_grid(depth: u32) -> QuadtreeGrid {
    build_quadtree(DomainBox::unit(), depth, (2, 2), &circle_requests(depth, 0.3)).unwrap()
}
