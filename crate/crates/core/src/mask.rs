//! Finite site sets on a periodic lattice.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::geometry::SiteMask;
use crate::grid::LatticeGrid;

#[derive(Clone, Debug, PartialEq)]
pub struct SiteSet {
    grid: LatticeGrid,
    sites: Vec<usize>,
}

impl SiteSet {
    pub fn new(grid: &LatticeGrid, mut sites: Vec<usize>) -> Result<Self> {
        sites.sort_unstable();
        sites.dedup();
        if let Some(&s) = sites.last() {
            if s >= grid.len() {
                return Err(Error::InvalidParameter(format!("site {s} out of range")));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            sites,
        })
    }

    pub fn empty(grid: &LatticeGrid) -> Self {
        Self {
            grid: grid.clone(),
            sites: vec![],
        }
    }

    pub fn full(grid: &LatticeGrid) -> Self {
        Self {
            grid: grid.clone(),
            sites: (0..grid.len()).collect(),
        }
    }

    /// Sites whose centered position satisfies the predicate.
    pub fn from_predicate(grid: &LatticeGrid, pred: impl Fn(&[f64]) -> bool) -> Self {
        Self {
            grid: grid.clone(),
            sites: (0..grid.len()).filter(|&i| pred(&grid.position(i))).collect(),
        }
    }

    /// Open Euclidean ball in centered coordinates.
    pub fn ball(grid: &LatticeGrid, center: &[f64], radius: f64) -> Self {
        Self::from_predicate(grid, |x| {
            x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < radius * radius
        })
    }

    /// Sites with `|x_i - c_i| ≤ half_width` on every axis.
    pub fn cube(grid: &LatticeGrid, center: &[f64], half_width: f64) -> Self {
        let eps = 1e-9 * grid.spacing();
        Self::from_predicate(grid, |x| {
            x.iter().zip(center).all(|(a, b)| (a - b).abs() <= half_width + eps)
        })
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    /// Position of a site inside the sorted list.
    pub fn rank(&self, site: usize) -> Option<usize> {
        self.sites.binary_search(&site).ok()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut s = self.sites.clone();
        s.extend_from_slice(&other.sites);
        Self::new(&self.grid, s)
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            sites: self.sites.iter().copied().filter(|&s| !other.contains(s)).collect(),
        })
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            sites: self.sites.iter().copied().filter(|&s| other.contains(s)).collect(),
        })
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.grid == other.grid && self.sites.iter().all(|&s| other.contains(s))
    }

    /// Add `rings` layers of Chebyshev neighbours.
    pub fn inflate(&self, rings: usize) -> Self {
        if rings == 0 {
            return self.clone();
        }
        let steps = self.grid.chebyshev_ball(rings as i64);
        let mut out: Vec<usize> = self
            .sites
            .iter()
            .flat_map(|&s| steps.iter().map(move |st| (s, st)))
            .map(|(s, st)| self.grid.shifted(s, st))
            .collect();
        out.sort_unstable();
        out.dedup();
        Self {
            grid: self.grid.clone(),
            sites: out,
        }
    }

    pub fn translated(&self, step: &[i64]) -> Self {
        let mut sites: Vec<usize> = self.sites.iter().map(|&s| self.grid.shifted(s, step)).collect();
        sites.sort_unstable();
        Self {
            grid: self.grid.clone(),
            sites,
        }
    }

    pub fn indicator(&self) -> LatticeField {
        LatticeField::indicator(&self.grid, &self.sites)
    }

    /// `[k(x_i - x_j)]` over the sites of the set, for a kernel indexed by lattice site.
    pub fn circulant_block(&self, kernel: &[f64]) -> DMatrix<f64> {
        let n = self.grid.sites_per_axis();
        let multi: Vec<Vec<usize>> = self.sites.iter().map(|&s| self.grid.multi_index(s)).collect();
        let mut diff = vec![0usize; self.grid.dim()];
        DMatrix::from_fn(self.len(), self.len(), |i, j| {
            for (k, d) in diff.iter_mut().enumerate() {
                *d = (multi[i][k] + n - multi[j][k]) % n;
            }
            kernel[self.grid.index_of(&diff)]
        })
    }

    /// Cells of the mask as a geometric base in centered coordinates.
    pub fn to_site_mask(&self) -> SiteMask {
        SiteMask {
            spacing: self.grid.spacing(),
            sites: self.sites.iter().map(|&s| self.grid.signed_coords(s)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra() {
        let g = LatticeGrid::new(2, 16, 1.0, 0.0).unwrap();
        let b = SiteSet::ball(&g, &[0.0, 0.0], 2.5);
        let c = SiteSet::cube(&g, &[0.0, 0.0], 4.0);
        assert_eq!(c.len(), 81);
        assert!(b.is_subset(&c));
        let diff = c.difference(&b).unwrap();
        assert_eq!(diff.len() + b.len(), c.len());
        assert!(diff.intersection(&b).unwrap().is_empty());
        assert_eq!(diff.union(&b).unwrap(), c);
    }

    #[test]
    fn inflation_adds_chebyshev_rings_with_wraparound() {
        let g = LatticeGrid::new(2, 8, 1.0, 0.0).unwrap();
        let one = SiteSet::new(&g, vec![g.index_signed(&[-4, -4])]).unwrap();
        let r = one.inflate(1);
        assert_eq!(r.len(), 9);
        assert!(r.contains(g.index_signed(&[3, 3])));
        assert_eq!(one.inflate(2).len(), 25);
    }

    #[test]
    fn translation_round_trip() {
        let g = LatticeGrid::new(2, 8, 1.0, 0.0).unwrap();
        let b = SiteSet::ball(&g, &[1.0, 0.0], 2.0);
        assert_eq!(b.translated(&[3, -2]).translated(&[-3, 2]), b);
    }
}
