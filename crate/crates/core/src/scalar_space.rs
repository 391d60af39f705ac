//! Scalar one-particle space in Cauchy-data form.
//!
//! Data `f = f0 ⊕ f1` carry the symplectic form `σ(f, g) = ⟨f0, g1⟩ - ⟨f1, g0⟩`, the
//! energy inner product `(f, g) = ⟨f0, ω g0⟩ + ⟨f1, ω⁻¹ g1⟩` and the complex structure
//! `J(f0 ⊕ f1) = (-ω⁻¹ f1) ⊕ (ω f0)`, with `σ(f, J g) = (f, g)`. In the massless sector
//! `ω⁻¹` is the pseudo-inverse and admissible momentum components have zero mean.
//!
//! Local subspaces live in a [`ScalarAmbient`], a chart of coordinates over a site set
//! with the restricted Gram matrices, so that subspace algebra is dense linear algebra
//! of size `2 × |chart|`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::cauchy::CauchyDatum;
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::LatticeGrid;
use crate::mask::SiteSet;
use crate::propagator::{propagate_to_cauchy_data, PropagatorKernel, SpacetimeSource};
use crate::spectral::{bump_profile, check_zero_mode, convolve_direct, mollifier, omega_power_table};
use crate::symplectic::{radical, subspace_gap, symplectic_complement, Subspace, SymplecticSpace, Tolerances};

fn same(f: &CauchyDatum, g: &CauchyDatum) -> Result<()> {
    if f.grid() != g.grid() {
        return Err(Error::AmbientMismatch);
    }
    Ok(())
}

fn check_momentum_sector(f: &CauchyDatum) -> Result<()> {
    if f.grid().is_massless() {
        check_zero_mode(&f.f1)?;
    }
    Ok(())
}

fn omega_apply(f: &LatticeField, s: f64) -> LatticeField {
    let grid = f.grid();
    let table = omega_power_table(grid, s);
    LatticeField::new(grid, grid.apply_multiplier(f.values(), |k| table[k])).expect("grid length")
}

pub fn symplectic_form(f: &CauchyDatum, g: &CauchyDatum) -> Result<f64> {
    same(f, g)?;
    Ok(f.f0.inner(&g.f1)? - f.f1.inner(&g.f0)?)
}

pub fn energy_inner(f: &CauchyDatum, g: &CauchyDatum) -> Result<f64> {
    same(f, g)?;
    check_momentum_sector(f)?;
    check_momentum_sector(g)?;
    Ok(f.f0.inner(&omega_apply(&g.f0, 1.0))? + f.f1.inner(&omega_apply(&g.f1, -1.0))?)
}

pub fn energy_norm(f: &CauchyDatum) -> Result<f64> {
    Ok(energy_inner(f, f)?.max(0.0).sqrt())
}

pub fn complex_structure(f: &CauchyDatum) -> Result<CauchyDatum> {
    if f.grid().is_massless() {
        check_zero_mode(&f.f0)?;
        check_zero_mode(&f.f1)?;
    }
    CauchyDatum::new(omega_apply(&f.f1, -1.0).scaled(-1.0), omega_apply(&f.f0, 1.0))
}

/// `f0 ⊕ f1 ↦ f0 ⊕ -f1`.
pub fn time_reversal(f: &CauchyDatum) -> CauchyDatum {
    CauchyDatum {
        f0: f.f0.clone(),
        f1: f.f1.scaled(-1.0),
    }
}

/// `ψ(f0 ⊕ f1) = -f1 ⊕ f0`, so that `⟨ψ(f), g⟩ = σ(f, g)`.
pub fn psi(f: &CauchyDatum) -> CauchyDatum {
    CauchyDatum {
        f0: f.f1.scaled(-1.0),
        f1: f.f0.clone(),
    }
}

pub fn psi_inverse(f: &CauchyDatum) -> CauchyDatum {
    CauchyDatum {
        f0: f.f1.clone(),
        f1: f.f0.scaled(-1.0),
    }
}

/// Componentwise quadrature pairing `⟨f0, g0⟩ + ⟨f1, g1⟩`.
pub fn pairing(f: &CauchyDatum, g: &CauchyDatum) -> Result<f64> {
    same(f, g)?;
    Ok(f.f0.inner(&g.f0)? + f.f1.inner(&g.f1)?)
}

fn kernel(grid: &LatticeGrid, s: f64) -> Vec<f64> {
    let mut e0 = vec![0.0; grid.len()];
    e0[0] = 1.0;
    let table = omega_power_table(grid, s);
    grid.apply_multiplier(&e0, |k| table[k])
}

/// Coordinates `[f0|_chart, f1|_chart]` with the restricted energy Gram matrix.
#[derive(Debug, Clone)]
pub struct ScalarAmbient {
    grid: LatticeGrid,
    chart: SiteSet,
    space: Arc<SymplecticSpace>,
}

impl ScalarAmbient {
    pub fn new(grid: &LatticeGrid, chart: &SiteSet, tol: Tolerances) -> Result<Self> {
        if chart.is_empty() {
            return Err(Error::EmptyMask);
        }
        if chart.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let w = grid.cell_volume();
        let g0 = chart.circulant_block(&kernel(grid, 1.0)) * w;
        let g1 = chart.circulant_block(&kernel(grid, -1.0)) * w;
        Ok(Self {
            grid: grid.clone(),
            chart: chart.clone(),
            space: SymplecticSpace::new(g0, g1, w, tol)?,
        })
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn chart(&self) -> &SiteSet {
        &self.chart
    }

    pub fn space(&self) -> &Arc<SymplecticSpace> {
        &self.space
    }

    pub fn to_vector(&self, f: &CauchyDatum) -> Result<DVector<f64>> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let b = self.chart.len();
        let mut v = DVector::zeros(2 * b);
        for (comp, field) in [&f.f0, &f.f1].into_iter().enumerate() {
            for (i, &val) in field.values().iter().enumerate() {
                if val == 0.0 {
                    continue;
                }
                match self.chart.rank(i) {
                    Some(r) => v[comp * b + r] = val,
                    None => {
                        return Err(Error::Precondition(format!(
                            "datum is supported outside the chart at site {i}"
                        )))
                    }
                }
            }
        }
        Ok(v)
    }

    pub fn to_datum(&self, v: &DVector<f64>) -> CauchyDatum {
        let b = self.chart.len();
        let mut f0 = vec![0.0; self.grid.len()];
        let mut f1 = vec![0.0; self.grid.len()];
        for (r, &s) in self.chart.sites().iter().enumerate() {
            f0[s] = v[r];
            f1[s] = v[b + r];
        }
        CauchyDatum {
            f0: LatticeField::new(&self.grid, f0).expect("grid length"),
            f1: LatticeField::new(&self.grid, f1).expect("grid length"),
        }
    }

    /// Span of `(δ_x, 0)` and `(0, δ_x)` for `x` in the mask; in the massless sector the
    /// momentum generators are `δ_x - 1_B/|B|`.
    pub fn local_subspace(&self, mask: &SiteSet) -> Result<Subspace> {
        if mask.is_empty() {
            return Err(Error::EmptyMask);
        }
        if !mask.is_subset(&self.chart) {
            return Err(Error::Containment { residual: 1.0 });
        }
        let b = self.chart.len();
        let k = mask.len();
        let mut gens = DMatrix::zeros(2 * b, 2 * k);
        let mean = if self.grid.is_massless() { 1.0 / k as f64 } else { 0.0 };
        let ranks: Vec<usize> = mask.sites().iter().map(|&s| self.chart.rank(s).expect("subset")).collect();
        for (j, &r) in ranks.iter().enumerate() {
            gens[(r, j)] = 1.0;
            for &r2 in &ranks {
                gens[(b + r2, k + j)] -= mean;
            }
            gens[(b + r, k + j)] += 1.0;
        }
        self.space.span(&gens)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DualityReport {
    pub region_sites: usize,
    pub complement_sites: usize,
    pub ambient_dim: usize,
    pub region_dim: usize,
    pub complement_dim: usize,
    pub radical_dim: usize,
    pub gap_forward: f64,
    pub gap_dual: f64,
    pub finite_dimensional: bool,
    pub note: String,
}

/// Relative duality inside `M`: compares `H(M ∖ B)^c` with `H(B)` and `H(B)^c` with
/// `H(M ∖ B)`, each joined with the radical of `σ` on `H(M)`. `B` and `M ∖ B` partition
/// the sites of `M`.
pub fn duality_check(
    grid: &LatticeGrid,
    b: &SiteSet,
    m: &SiteSet,
    tol: Tolerances,
) -> Result<DualityReport> {
    if b.is_empty() {
        return Err(Error::EmptyMask);
    }
    if !b.is_subset(m) {
        return Err(Error::Containment { residual: 1.0 });
    }
    let amb = ScalarAmbient::new(grid, m, tol)?;
    let hm = amb.local_subspace(m)?;
    let rad = radical(&hm)?;
    let hb = amb.local_subspace(b)?;
    let c = m.difference(b)?;
    let hc = if c.is_empty() {
        amb.space().zero()
    } else {
        amb.local_subspace(&c)?
    };
    let hc_perp = symplectic_complement(&hc, &hm)?;
    let hb_perp = symplectic_complement(&hb, &hm)?;
    let gap_forward = subspace_gap(&hc_perp, &hb.join(&rad)?)?;
    let gap_dual = subspace_gap(&hb_perp, &hc.join(&rad)?)?;
    Ok(DualityReport {
        region_sites: b.len(),
        complement_sites: c.len(),
        ambient_dim: hm.dim(),
        region_dim: hb.dim(),
        complement_dim: hc.dim(),
        radical_dim: rad.dim(),
        gap_forward,
        gap_dual,
        finite_dimensional: true,
        note: "finite-dimensional lattice duality: exact up to orthonormalization rounding".into(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OuterRegularityReport {
    pub neighborhood_sites: Vec<usize>,
    /// `gap(H(A_k), H(B̄))` along the shrinking family.
    pub gaps: Vec<f64>,
    /// `dim H(A_k) - dim H(B̄)`.
    pub excess_dims: Vec<usize>,
    /// `gap(H(B̄), H(B))`, the one-ring lattice floor.
    pub floor_gap: f64,
    pub floor_excess_dim: usize,
    pub non_increasing: bool,
}

/// Neighbourhoods `B + k rings` for the given ring counts.
pub fn ring_inflations(b: &SiteSet, rings: &[usize]) -> Vec<SiteSet> {
    rings.iter().map(|&k| b.inflate(k)).collect()
}

/// Gap series of `H(A_k)` against `H(B̄)`, `B̄ = B + 1 ring`, for a shrinking family of
/// neighbourhoods of `B̄`.
pub fn outer_regularity_scan(
    grid: &LatticeGrid,
    b: &SiteSet,
    neighborhoods: &[SiteSet],
    tol: Tolerances,
) -> Result<OuterRegularityReport> {
    if b.is_empty() || neighborhoods.is_empty() {
        return Err(Error::EmptyMask);
    }
    let closure = b.inflate(1);
    for (k, a) in neighborhoods.iter().enumerate() {
        if !closure.is_subset(a) {
            return Err(Error::NotNested(format!("neighbourhood {k} misses the closure")));
        }
        if k > 0 && !a.is_subset(&neighborhoods[k - 1]) {
            return Err(Error::NotNested(format!("neighbourhood {k} is not inside {}", k - 1)));
        }
    }
    let amb = ScalarAmbient::new(grid, &neighborhoods[0], tol)?;
    let hbar = amb.local_subspace(&closure)?;
    let hb = amb.local_subspace(b)?;
    let mut gaps = vec![];
    let mut excess = vec![];
    for a in neighborhoods {
        let ha = amb.local_subspace(a)?;
        gaps.push(subspace_gap(&ha, &hbar)?);
        excess.push(ha.dim() - hbar.dim());
    }
    let non_increasing = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(OuterRegularityReport {
        neighborhood_sites: neighborhoods.iter().map(|a| a.len()).collect(),
        gaps,
        excess_dims: excess,
        floor_gap: subspace_gap(&hbar, &hb)?,
        floor_excess_dim: hbar.dim() - hb.dim(),
        non_increasing,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MollifierReport {
    pub schedule: Vec<u32>,
    pub errors: Vec<f64>,
    pub relative_errors: Vec<f64>,
    pub support_ok: Vec<bool>,
    pub strictly_decreasing: bool,
}

fn axis_extent(grid: &LatticeGrid, sites: &[usize]) -> f64 {
    let n = grid.sites_per_axis();
    let mut worst: f64 = 0.0;
    for axis in 0..grid.dim() {
        let mut occ = vec![false; n];
        for &s in sites {
            occ[grid.multi_index(s)[axis]] = true;
        }
        // Shortest arc covering the occupied coordinates is n minus the largest gap.
        let mut best_gap = 0;
        let mut run = 0;
        for i in 0..2 * n {
            if occ[i % n] {
                run = 0;
            } else {
                run += 1;
                best_gap = best_gap.max(run.min(n));
            }
        }
        worst = worst.max((n - best_gap) as f64 * grid.spacing());
    }
    worst
}

/// `f_n = ψ⁻¹(ρ_n ∗ ψ(f))`, energy error `‖f_n - f‖` and the support inclusion
/// `supp f_n ⊂ supp ψ(f) + ball(1/n)` per `n`.
pub fn mollifier_convergence(f: &CauchyDatum, schedule: &[u32]) -> Result<MollifierReport> {
    let grid = f.grid();
    let pf = psi(f);
    let supp0 = pf.f0.exact_support();
    let supp1 = pf.f1.exact_support();
    let mut all: Vec<usize> = supp0.iter().chain(&supp1).copied().collect();
    all.sort_unstable();
    all.dedup();
    let extent = axis_extent(grid, &all);
    let norm_f = energy_norm(f)?;
    let mut errors = vec![];
    let mut rel = vec![];
    let mut support_ok = vec![];
    for &n in schedule {
        let rho = mollifier(grid, n)?;
        if extent + 2.0 / n as f64 >= grid.extent() {
            return Err(Error::Wraparound(format!(
                "support extent {extent} plus mollifier margin exceeds the box"
            )));
        }
        let smoothed = CauchyDatum::new(convolve_direct(&pf.f0, &rho)?, convolve_direct(&pf.f1, &rho)?)?;
        let fnn = psi_inverse(&smoothed);
        let err = energy_norm(&fnn.sub(f)?)?;
        errors.push(err);
        rel.push(if norm_f > 0.0 { err / norm_f } else { 0.0 });
        let r = 1.0 / n as f64;
        let within = |field: &LatticeField| {
            field.exact_support().into_iter().all(|x| {
                all.iter().any(|&y| grid.distance(x, y) < r)
            })
        };
        support_ok.push(within(&smoothed.f0) && within(&smoothed.f1));
    }
    let strictly_decreasing = errors.windows(2).all(|w| w[1] < w[0]) || errors.iter().all(|&e| e == 0.0);
    Ok(MollifierReport {
        schedule: schedule.to_vec(),
        errors,
        relative_errors: rel,
        support_ok,
        strictly_decreasing,
    })
}

/// Smooth datum: a few normalized bumps with seeded centers, radii and amplitudes in
/// both components; the momentum component has its mean removed in the massless sector.
pub fn random_smooth_datum(grid: &LatticeGrid, radius: f64, bumps: usize, seed: u64) -> CauchyDatum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = grid.extent() / 2.0;
    let mut comps = vec![];
    for _ in 0..2 {
        let mut f = LatticeField::zeros(grid);
        for _ in 0..bumps {
            let c: Vec<f64> = (0..grid.dim()).map(|_| rng.gen_range(-0.4 * half..0.4 * half)).collect();
            let r = radius * rng.gen_range(0.6..1.0);
            let amp = rng.gen_range(-1.0..1.0);
            let b = LatticeField::from_fn(grid, |x| {
                let d2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                amp * bump_profile(d2.sqrt() / r)
            });
            f = f.add(&b).expect("same grid");
        }
        comps.push(f);
    }
    let f1 = comps.pop().expect("two components");
    let f0 = comps.pop().expect("two components");
    let f1 = if grid.is_massless() { f1.without_mean() } else { f1 };
    let f0 = if grid.is_massless() { f0.without_mean() } else { f0 };
    CauchyDatum { f0, f1 }
}

/// Seeded single-slice sources `δ_{x_j}` at times `t_j` with `|x_j| < t_j < L/2`.
pub fn forward_cone_sources(grid: &LatticeGrid, count: usize, seed: u64) -> Vec<SpacetimeSource> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = grid.extent() / 2.0;
    let mut out = vec![];
    while out.len() < count {
        let t = rng.gen_range(0.05 * horizon..0.95 * horizon);
        let site = rng.gen_range(0..grid.len());
        if grid.radius(site) < t {
            out.push(SpacetimeSource::single(t, LatticeField::delta(grid, site)));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DensityReport {
    pub family_sizes: Vec<usize>,
    /// `residuals[target][k]`: relative energy residual after projecting onto the first
    /// `family_sizes[k]` propagated sources.
    pub residuals: Vec<Vec<f64>>,
    pub non_increasing: bool,
    pub span_dims: Vec<usize>,
}

/// Relative energy residuals of targets projected onto the Cauchy data of growing
/// prefixes of a forward-cone source family.
pub fn forward_cone_density_residual(
    targets: &[CauchyDatum],
    family: &[SpacetimeSource],
    kernel: &PropagatorKernel,
    family_sizes: &[usize],
    tol: Tolerances,
) -> Result<DensityReport> {
    let grid = kernel.grid();
    if grid.is_massless() {
        return Err(Error::Precondition("forward-cone density needs m > 0".into()));
    }
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty source family".into()));
    }
    for src in family {
        for s in src.slices() {
            let inside = s.time > 0.0
                && s.field.exact_support().into_iter().all(|x| grid.radius(x) < s.time);
            if !inside {
                return Err(Error::Precondition("source leaves the forward cone".into()));
            }
        }
    }
    if family_sizes.iter().any(|&k| k == 0 || k > family.len()) {
        return Err(Error::InvalidParameter("family size out of range".into()));
    }
    let amb = ScalarAmbient::new(grid, &SiteSet::full(grid), tol)?;
    let data: Vec<DVector<f64>> = family
        .iter()
        .map(|s| propagate_to_cauchy_data(s, kernel).and_then(|d| amb.to_vector(&d)))
        .collect::<Result<_>>()?;
    let tvecs: Vec<DVector<f64>> = targets.iter().map(|t| amb.to_vector(t)).collect::<Result<_>>()?;
    let mut residuals = vec![vec![]; targets.len()];
    let mut span_dims = vec![];
    for &k in family_sizes {
        let gens = DMatrix::from_columns(&data[..k]);
        let v = amb.space().span(&gens)?;
        span_dims.push(v.dim());
        for (t, h) in tvecs.iter().enumerate() {
            let r = h - v.project(h);
            let g = amb.space();
            let rel = (g.energy(&r, &r).max(0.0) / g.energy(h, h)).sqrt();
            residuals[t].push(rel);
        }
    }
    let non_increasing = residuals
        .iter()
        .all(|s| s.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14));
    Ok(DensityReport {
        family_sizes: family_sizes.to_vec(),
        residuals,
        non_increasing,
        span_dims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_datum(grid: &LatticeGrid, seed: u64) -> CauchyDatum {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f0 = LatticeField::new(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let mut f1 = LatticeField::new(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        if grid.is_massless() {
            f0 = f0.without_mean();
            f1 = f1.without_mean();
        }
        CauchyDatum { f0, f1 }
    }

    fn grids() -> Vec<LatticeGrid> {
        vec![
            LatticeGrid::new(2, 8, 0.5, 0.0).unwrap(),
            LatticeGrid::new(2, 8, 0.5, 1.0).unwrap(),
            LatticeGrid::new(1, 16, 0.3, 0.7).unwrap(),
        ]
    }

    #[test]
    fn symplectic_form_of_a_site_pair() {
        let g = LatticeGrid::new(2, 8, 0.5, 1.0).unwrap();
        let z = LatticeField::zeros(&g);
        let d = LatticeField::delta(&g, 9);
        let f = CauchyDatum::new(d.clone(), z.clone()).unwrap();
        let h = CauchyDatum::new(z, d).unwrap();
        assert!((symplectic_form(&f, &h).unwrap() - 1.0 / g.cell_volume()).abs() < 1e-12);
    }

    #[test]
    fn single_mode_energy() {
        let g = LatticeGrid::new(2, 16, 0.25, 0.8).unwrap();
        let k = g.index_of(&[3, 1]);
        let p = g.momentum(k);
        let c = LatticeField::from_fn(&g, |x| (p[0] * x[0] + p[1] * x[1]).cos());
        let f = CauchyDatum::new(c.clone(), LatticeField::zeros(&g)).unwrap();
        let e = energy_inner(&f, &f).unwrap();
        let expected = g.omega(k) * c.norm().powi(2);
        assert!((e - expected).abs() < 1e-10 * expected);
        // The momentum component of the mode carries ω⁻¹.
        let h = CauchyDatum::new(LatticeField::zeros(&g), c.clone()).unwrap();
        let e = energy_inner(&h, &h).unwrap();
        assert!((e - c.norm().powi(2) / g.omega(k)).abs() < 1e-10 * e);
    }

    #[test]
    fn position_and_momentum_components_are_energy_orthogonal() {
        for g in grids() {
            let f = random_datum(&g, 1);
            let a = CauchyDatum::new(f.f0.clone(), LatticeField::zeros(&g)).unwrap();
            let b = CauchyDatum::new(LatticeField::zeros(&g), f.f1.clone()).unwrap();
            assert_eq!(energy_inner(&a, &b).unwrap(), 0.0);
        }
    }

    #[test]
    fn massless_momentum_needs_zero_mean() {
        let g = LatticeGrid::new(1, 8, 1.0, 0.0).unwrap();
        let f = CauchyDatum::new(LatticeField::zeros(&g), LatticeField::constant(&g, 1.0)).unwrap();
        assert!(matches!(energy_inner(&f, &f), Err(Error::ZeroModeViolation { .. })));
    }

    #[test]
    fn full_mask_dimensions() {
        let g = LatticeGrid::new(2, 8, 0.5, 0.0).unwrap();
        let full = SiteSet::full(&g);
        let amb = ScalarAmbient::new(&g, &full, Tolerances::default()).unwrap();
        assert_eq!(amb.local_subspace(&full).unwrap().dim(), 2 * 64 - 2);
        let g = g.with_mass(1.0).unwrap();
        let full = SiteSet::full(&g);
        let amb = ScalarAmbient::new(&g, &full, Tolerances::default()).unwrap();
        let h = amb.local_subspace(&full).unwrap();
        assert_eq!(h.dim(), 2 * 64);
        assert!(h.orthonormality_error() < 1e-10);
        let one = SiteSet::new(&g, vec![5]).unwrap();
        assert_eq!(amb.local_subspace(&one).unwrap().dim(), 2);
    }

    #[test]
    fn nested_masks_give_nested_subspaces() {
        for m in [0.0, 1.0] {
            let g = LatticeGrid::new(2, 16, 1.0, m).unwrap();
            let chart = SiteSet::cube(&g, &[0.0, 0.0], 5.0);
            let amb = ScalarAmbient::new(&g, &chart, Tolerances::default()).unwrap();
            let small = amb.local_subspace(&SiteSet::ball(&g, &[0.0, 0.0], 2.5)).unwrap();
            let big = amb.local_subspace(&SiteSet::ball(&g, &[0.0, 0.0], 4.0)).unwrap();
            assert!(big.excess(&small).unwrap() < 1e-10);
        }
    }

    #[test]
    fn massive_local_subspaces_are_additive() {
        let g = LatticeGrid::new(2, 16, 1.0, 1.0).unwrap();
        let chart = SiteSet::cube(&g, &[0.0, 0.0], 5.0);
        let amb = ScalarAmbient::new(&g, &chart, Tolerances::default()).unwrap();
        let b1 = SiteSet::ball(&g, &[-2.0, 0.0], 2.0);
        let b2 = SiteSet::ball(&g, &[2.0, 1.0], 2.5);
        let joined = amb.local_subspace(&b1).unwrap().join(&amb.local_subspace(&b2).unwrap()).unwrap();
        let union = amb.local_subspace(&b1.union(&b2).unwrap()).unwrap();
        assert!(subspace_gap(&joined, &union).unwrap() < 1e-8);
    }

    #[test]
    fn chart_vectors_reproduce_spectral_forms() {
        for g in grids() {
            let chart = SiteSet::full(&g);
            let amb = ScalarAmbient::new(&g, &chart, Tolerances::default()).unwrap();
            let f = random_datum(&g, 2);
            let h = random_datum(&g, 3);
            let (vf, vh) = (amb.to_vector(&f).unwrap(), amb.to_vector(&h).unwrap());
            let e = energy_inner(&f, &h).unwrap();
            assert!((amb.space().energy(&vf, &vh) - e).abs() < 1e-10 * (1.0 + e.abs()));
            let s = symplectic_form(&f, &h).unwrap();
            assert!((amb.space().sigma(&vf, &vh) - s).abs() < 1e-10 * (1.0 + s.abs()));
            let back = amb.to_datum(&vf);
            assert!(back.sub(&f).unwrap().max_abs() == 0.0);
        }
    }

    #[test]
    fn duality_on_ball_in_square() {
        for m in [0.0, 1.0] {
            let g = LatticeGrid::new(2, 16, 1.0, m).unwrap();
            let mm = SiteSet::cube(&g, &[0.0, 0.0], 5.0);
            let b = SiteSet::ball(&g, &[0.0, 0.0], 3.0);
            let rep = duality_check(&g, &b, &mm, Tolerances::default()).unwrap();
            assert!(rep.gap_forward < 1e-8 && rep.gap_dual < 1e-8, "{rep:?}");
            assert_eq!(rep.radical_dim, if m == 0.0 { 1 } else { 0 });
            let shifted = duality_check(&g, &b.translated(&[3, -2]), &mm.translated(&[3, -2]), Tolerances::default()).unwrap();
            assert!(shifted.gap_forward < 1e-8 && shifted.gap_dual < 1e-8);
            assert_eq!(shifted.region_dim, rep.region_dim);
        }
    }

    #[test]
    fn duality_with_the_whole_ambient() {
        let g = LatticeGrid::new(2, 16, 1.0, 1.0).unwrap();
        let mm = SiteSet::cube(&g, &[0.0, 0.0], 3.0);
        let rep = duality_check(&g, &mm, &mm, Tolerances::default()).unwrap();
        assert_eq!(rep.complement_dim, 0);
        assert!(rep.gap_forward < 1e-10);
    }

    #[test]
    fn outer_regularity_series() {
        let g = LatticeGrid::new(2, 32, 1.0, 1.0).unwrap();
        let b = SiteSet::ball(&g, &[0.0, 0.0], 3.0);
        let fam = ring_inflations(&b, &[4, 3, 2, 1]);
        let rep = outer_regularity_scan(&g, &b, &fam, Tolerances::default()).unwrap();
        assert!(rep.non_increasing);
        assert!(*rep.gaps.last().unwrap() < 1e-8);
        assert!(rep.floor_gap > 0.5 && rep.floor_excess_dim > 0);
        let constant = vec![b.inflate(2); 3];
        let rep = outer_regularity_scan(&g, &b, &constant, Tolerances::default()).unwrap();
        assert!(rep.gaps.windows(2).all(|w| w[0] == w[1]));
        let bad = ring_inflations(&b, &[1, 2]);
        assert!(matches!(outer_regularity_scan(&g, &b, &bad, Tolerances::default()), Err(Error::NotNested(_))));
    }

    #[test]
    fn mollified_data_converge_with_controlled_support() {
        let g = LatticeGrid::new(2, 64, 1.0 / 32.0, 1.0).unwrap();
        let f = random_smooth_datum(&g, 0.35, 2, 11);
        let cut = SiteSet::ball(&g, &[0.0, 0.0], 0.7).indicator();
        let f = CauchyDatum::new(f.f0.mul(&cut).unwrap(), f.f1.mul(&cut).unwrap()).unwrap();
        let rep = mollifier_convergence(&f, &[4, 8, 16]).unwrap();
        assert!(rep.support_ok.iter().all(|&b| b), "{rep:?}");
        assert!(rep.strictly_decreasing, "{rep:?}");
        let zero = CauchyDatum::zeros(&g);
        let rep = mollifier_convergence(&zero, &[4, 8, 16]).unwrap();
        assert!(rep.errors.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn density_residuals_shrink_and_span_members_are_reproduced() {
        let g = LatticeGrid::new(2, 16, 1.0, 1.0).unwrap();
        let k = PropagatorKernel::new(&g);
        let fam = forward_cone_sources(&g, 16, 4);
        let inside = propagate_to_cauchy_data(&fam[2], &k).unwrap();
        let targets = vec![random_smooth_datum(&g, 3.0, 3, 1), inside];
        let rep = forward_cone_density_residual(&targets, &fam, &k, &[4, 8, 16], Tolerances::default()).unwrap();
        assert!(rep.non_increasing, "{rep:?}");
        assert!(rep.residuals[1][0] < 1e-10);
        let massless = PropagatorKernel::new(&g.with_mass(0.0).unwrap());
        assert!(forward_cone_density_residual(&targets, &fam, &massless, &[4], Tolerances::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn form_identities(seed in 0u64..10_000) {
            for g in grids() {
                let f = random_datum(&g, seed);
                let h = random_datum(&g, seed + 1);
                let s = symplectic_form(&f, &h).unwrap();
                prop_assert!((s + symplectic_form(&h, &f).unwrap()).abs() < 1e-12 * (1.0 + s.abs()));
                prop_assert!(symplectic_form(&f, &f).unwrap().abs() < 1e-12);
                let e = energy_inner(&f, &h).unwrap();
                prop_assert!((e - energy_inner(&h, &f).unwrap()).abs() < 1e-10 * (1.0 + e.abs()));
                prop_assert!(energy_inner(&f, &f).unwrap() > 0.0);
                let jh = complex_structure(&h).unwrap();
                prop_assert!((symplectic_form(&f, &jh).unwrap() - e).abs() < 1e-10 * (1.0 + e.abs()));
                let jjf = complex_structure(&complex_structure(&f).unwrap()).unwrap();
                prop_assert!(jjf.add(&f).unwrap().max_abs() < 1e-12 * (1.0 + f.max_abs()) * 10.0);
                let nf = energy_norm(&f).unwrap();
                prop_assert!((energy_norm(&complex_structure(&f).unwrap()).unwrap() - nf).abs() < 1e-12 * nf * 10.0);
                prop_assert!(s.abs() <= nf * energy_norm(&h).unwrap() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn time_reversal_and_psi(seed in 0u64..10_000) {
            for g in grids() {
                let f = random_datum(&g, seed);
                let h = random_datum(&g, seed + 7);
                let (tf, th) = (time_reversal(&f), time_reversal(&h));
                let ttf = time_reversal(&tf);
                prop_assert_eq!(ttf.f1.values(), f.f1.values());
                let e = energy_inner(&f, &h).unwrap();
                prop_assert!((energy_inner(&tf, &th).unwrap() - e).abs() < 1e-12 * (1.0 + e.abs()));
                let s = symplectic_form(&f, &h).unwrap();
                prop_assert!((symplectic_form(&tf, &th).unwrap() + s).abs() < 1e-12 * (1.0 + s.abs()));
                prop_assert!((pairing(&psi(&f), &h).unwrap() - s).abs() < 1e-12 * (1.0 + s.abs()));
                let pp = psi(&psi(&f));
                prop_assert!(pp.add(&f).unwrap().max_abs() == 0.0);
            }
        }
    }
}
