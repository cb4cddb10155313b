use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::grid::QuadtreeGrid;

/// Real values attached to the nodes of one specific grid generation.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    generation: u64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &QuadtreeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "grid has {} nodes, got {} values",
                grid.len(),
                values.len()
            )));
        }
        Ok(GridFunction {
            generation: grid.generation(),
            values,
        })
    }

    pub fn zeros(grid: &QuadtreeGrid) -> Self {
        GridFunction {
            generation: grid.generation(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &QuadtreeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        GridFunction {
            generation: grid.generation(),
            values: grid.nodes().iter().map(|n| f(n.x, n.y)).collect(),
        }
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, grid: &QuadtreeGrid) -> Result<()> {
        if self.generation != grid.generation() {
            return Err(Error::GenerationMismatch {
                expected: grid.generation(),
                found: self.generation,
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm distance to another function on the same grid.
    pub fn max_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<usize> for GridFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for GridFunction {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}
