//! Scalar Cauchy data `f0 ⊕ f1` on a lattice.

use crate::error::Result;
use crate::field::LatticeField;
use crate::grid::LatticeGrid;

#[derive(Clone, Debug)]
pub struct CauchyDatum {
    pub f0: LatticeField,
    pub f1: LatticeField,
}

impl CauchyDatum {
    pub fn new(f0: LatticeField, f1: LatticeField) -> Result<Self> {
        f0.same_grid(&f1)?;
        Ok(Self { f0, f1 })
    }

    pub fn zeros(grid: &LatticeGrid) -> Self {
        Self {
            f0: LatticeField::zeros(grid),
            f1: LatticeField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &LatticeGrid {
        self.f0.grid()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            f0: self.f0.add(&other.f0)?,
            f1: self.f1.add(&other.f1)?,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            f0: self.f0.sub(&other.f0)?,
            f1: self.f1.sub(&other.f1)?,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            f0: self.f0.scaled(s),
            f1: self.f1.scaled(s),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.f0.max_abs().max(self.f1.max_abs())
    }

    /// Stacked site values `[f0, f1]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.f0.values().to_vec();
        v.extend_from_slice(self.f1.values());
        v
    }

    pub fn from_slice(grid: &LatticeGrid, v: &[f64]) -> Result<Self> {
        let n = grid.len();
        Self::new(
            LatticeField::new(grid, v[..n].to_vec())?,
            LatticeField::new(grid, v[n..].to_vec())?,
        )
    }
}
