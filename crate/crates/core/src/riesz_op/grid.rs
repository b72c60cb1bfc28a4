use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor grid on `[a,b]^d` with `m` subintervals per axis.
///
/// Only the `m - 1` interior nodes per axis carry unknowns; boundary values
/// are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub dim: usize,
}

impl GridSpec {
    pub fn new(a: f64, b: f64, m: usize, dim: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidArgument(format!(
                "domain [{a}, {b}] must be a finite interval with b > a"
            )));
        }
        if m < 4 {
            return Err(Error::InvalidArgument(format!(
                "M = {m} subintervals; at least 4 are required"
            )));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "dimension {dim} not supported (1, 2 or 3)"
            )));
        }
        Ok(Self { a, b, m, dim })
    }

    /// Unit interval `[0,1]` in one dimension.
    pub fn unit(m: usize) -> Result<Self> {
        Self::new(0.0, 1.0, m, 1)
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.m as f64
    }

    /// Interior nodes per axis, `M - 1`.
    pub fn n_axis(&self) -> usize {
        self.m - 1
    }

    /// Total number of unknowns, `(M - 1)^d`.
    pub fn len(&self) -> usize {
        self.n_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `j` (0..=M) along any axis.
    pub fn node(&self, j: usize) -> f64 {
        self.a + j as f64 * self.h()
    }

    /// Interior coordinates `x_1, ..., x_{M-1}`.
    pub fn interior_nodes(&self) -> Vec<f64> {
        (1..self.m).map(|j| self.node(j)).collect()
    }

    /// Interior multi-index of flat position `idx`; axis 0 varies slowest.
    pub fn unflatten(&self, mut idx: usize) -> [usize; 3] {
        let n = self.n_axis();
        let mut out = [0usize; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % n;
            idx /= n;
        }
        out
    }

    /// Cell volume `h^d` used by the discrete inner product.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }
}

/// Grid function on the interior nodes, lexicographically ordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl StateField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at interior index {bad}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Sample `f` at the interior nodes; `f` receives `d` coordinates.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let nodes = grid.interior_nodes();
        let values = (0..grid.len())
            .map(|idx| {
                let multi = grid.unflatten(idx);
                let coords: Vec<f64> = multi[..grid.dim].iter().map(|&i| nodes[i]).collect();
                f(&coords)
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
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

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete inner product `h^d Σ u_j v_j`.
    pub fn inner(&self, other: &StateField) -> f64 {
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        self.grid.cell_volume() * dot
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }
}
