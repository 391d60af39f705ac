//! Real scalar fields on a [`LatticeGrid`].

use crate::error::{Error, Result};
use crate::grid::LatticeGrid;

#[derive(Clone, Debug)]
pub struct LatticeField {
    grid: LatticeGrid,
    values: Vec<f64>,
}

impl LatticeField {
    pub fn new(grid: &LatticeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &LatticeGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &LatticeGrid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Sample a function of the centered site position.
    pub fn from_fn(grid: &LatticeGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Lattice delta at a site: `1/a^d` there, zero elsewhere.
    pub fn delta(grid: &LatticeGrid, site: usize) -> Self {
        let mut f = Self::zeros(grid);
        f.values[site] = 1.0 / grid.cell_volume();
        f
    }

    /// Indicator of a site set.
    pub fn indicator(grid: &LatticeGrid, sites: &[usize]) -> Self {
        let mut f = Self::zeros(grid);
        for &s in sites {
            f.values[s] = 1.0;
        }
        f
    }

    pub fn grid(&self) -> &LatticeGrid {
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

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Quadrature inner product `a^d Σ f g`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.grid.cell_volume() * dot(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        (self.grid.cell_volume() * dot(&self.values, &self.values)).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Remove the zero momentum mode.
    pub fn without_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Translate by an integer lattice step: `out(x + step) = f(x)`.
    pub fn translated(&self, step: &[i64]) -> Self {
        let mut out = vec![0.0; self.values.len()];
        for (i, &v) in self.values.iter().enumerate() {
            out[self.grid.shifted(i, step)] = v;
        }
        Self {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// Point reflection `x ↦ -x`.
    pub fn reflected(&self) -> Self {
        let mut out = vec![0.0; self.values.len()];
        for (i, &v) in self.values.iter().enumerate() {
            out[self.grid.negate_index(i)] = v;
        }
        Self {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// Sites with `|f| > rel_tol · max|f|`.
    pub fn support(&self, rel_tol: f64) -> Vec<usize> {
        let thr = rel_tol * self.max_abs();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > thr && **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sites carrying an exactly nonzero value.
    pub fn exact_support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
