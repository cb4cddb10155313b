use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::function::GridFunction;
use crate::grid::QuadtreeGrid;
use crate::operators::{cfl_bounds, OperatorSpec};

/// Active nodes grouped by nearest-neighbor distance, with local time
/// steps a power of two apart and a randomly permuted visit order.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGroups {
    pub groups: Vec<Vec<usize>>,
    /// Lattice exponent of the nearest-neighbor distance of each group.
    pub exponents: Vec<u32>,
    /// `τ_g = coarse_step / multiplicity[g]`.
    pub tau: Vec<f64>,
    pub multiplicity: Vec<u32>,
    pub schedule: Vec<usize>,
    pub coarse_step: f64,
}

impl TimeGroups {
    /// Node updates performed by one coarse step: `Σ m_g |g|`.
    pub fn work(&self) -> usize {
        self.groups
            .iter()
            .zip(&self.multiplicity)
            .map(|(g, &m)| g.len() * m as usize)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.schedule.is_empty()
    }

    /// Same groups and order with every step multiplied by `theta`.
    pub fn scaled(&self, theta: f64) -> TimeGroups {
        let mut t = self.clone();
        t.coarse_step *= theta;
        for tau in &mut t.tau {
            *tau *= theta;
        }
        t
    }
}

/// Group the active nodes and draw a fresh visit schedule from `rng`.
///
/// Nodes with no finite time step restriction are left out.
pub fn build_schedule(
    grid: &QuadtreeGrid,
    op: &OperatorSpec,
    u: &GridFunction,
    rng: &mut impl Rng,
) -> Result<TimeGroups> {
    let dt = cfl_bounds(op, grid, u)?;
    let mut by_exp: BTreeMap<u32, (Vec<usize>, f64)> = BTreeMap::new();
    for (i, &d) in dt.iter().enumerate() {
        if !op.is_active(i) || !d.is_finite() {
            continue;
        }
        let e = grid.node(i).nearest_lattice().trailing_zeros();
        let entry = by_exp.entry(e).or_insert((Vec::new(), f64::INFINITY));
        entry.0.push(i);
        entry.1 = entry.1.min(d);
    }
    if by_exp.is_empty() {
        return Ok(TimeGroups {
            groups: Vec::new(),
            exponents: Vec::new(),
            tau: Vec::new(),
            multiplicity: Vec::new(),
            schedule: Vec::new(),
            coarse_step: f64::INFINITY,
        });
    }
    // coarsest groups first
    let (exponents, rest): (Vec<u32>, Vec<(Vec<usize>, f64)>) = by_exp.into_iter().rev().unzip();
    let (groups, limits): (Vec<Vec<usize>>, Vec<f64>) = rest.into_iter().unzip();
    let top = limits.iter().cloned().fold(0.0, f64::max);
    let powers: Vec<u32> = limits
        .iter()
        .map(|&l| ((top / l).log2() - 1e-9).ceil().max(0.0) as u32)
        .collect();
    // largest coarse step with every τ_g = coarse / 2^p_g within its limit
    let coarse_step = limits
        .iter()
        .zip(&powers)
        .map(|(&l, &p)| l * (1u64 << p) as f64)
        .fold(f64::INFINITY, f64::min);
    let multiplicity: Vec<u32> = powers.iter().map(|&p| 1u32 << p).collect();
    let tau = multiplicity.iter().map(|&m| coarse_step / m as f64).collect();
    let mut schedule: Vec<usize> = multiplicity
        .iter()
        .enumerate()
        .flat_map(|(g, &m)| std::iter::repeat_n(g, m as usize))
        .collect();
    schedule.shuffle(rng);
    Ok(TimeGroups {
        groups,
        exponents,
        tau,
        multiplicity,
        schedule,
        coarse_step,
    })
}
