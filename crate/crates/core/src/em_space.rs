//! Free electromagnetic one-particle space in Cauchy-data form.
//!
//! A datum is a gauge class `[a]` together with an electric field `e`, `div e = 0`. Fields
//! live on lattice links: component `i` at site `x` sits on the link `x → x + a e_i`.
//! Gradients and curls are forward differences, the divergence is the backward difference,
//! so that `curl grad = 0` and `div` annihilates the image of the transverse projector
//! exactly. In momentum space the forward difference is `κ_i = (e^{i p_i a} - 1)/a` and the
//! dispersion is `|κ|`. The grid mass is not used.
//!
//! Norms: `‖[a] ⊕ e‖² = ‖P_T a‖₊² + ‖e‖₋²` with `‖g‖₊² = ⟨g, |κ| g⟩` and
//! `‖g‖₋² = ⟨g, |κ|⁻¹ g⟩`, where `P_T = 1 - κ κ^*/|κ|²` and the zero mode is dropped.
//! The magnetic form `‖b‖₋`, `b = curl a`, agrees with `‖P_T a‖₊` by the Lagrange identity
//! `|κ ∧ â|² = |κ|² |P_T â|²`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::geometry::{boost_cap_contains, ConformalMap, Point};
use crate::grid::{Dispersion, LatticeGrid};
use crate::mask::SiteSet;
use crate::spectral::{bump, convolve_direct, mult_operator_norm_estimate, PowerIteration, Sign};
use crate::symplectic::{radical, subspace_gap, symplectic_complement, Subspace, SymplecticSpace, Tolerances};

/// Relative tolerance for `div e = 0`, measured against `max|e| / a`.
pub const DIVERGENCE_TOL: f64 = 1e-10;
/// Relative threshold for magnetic support, measured against `max|a| / a`.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Relative eigenvalue cutoff separating pure-gauge directions from classes.
const GRAM_NULL_TOL: f64 = 1e-12;

fn check_dim(grid: &LatticeGrid) -> Result<()> {
    match grid.dim() {
        2 | 3 => Ok(()),
        d => Err(Error::Unsupported(format!("electromagnetic fields need d = 2 or 3, got {d}"))),
    }
}

fn check_components(grid: &LatticeGrid, comps: &[LatticeField]) -> Result<()> {
    if comps.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: comps.len(),
        });
    }
    for c in comps {
        if c.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    Ok(())
}

fn unit(grid: &LatticeGrid, i: usize) -> Vec<i64> {
    let mut s = vec![0i64; grid.dim()];
    s[i] = 1;
    s
}

fn shift_values(f: &LatticeField, step: &[i64]) -> Vec<f64> {
    let grid = f.grid();
    (0..grid.len()).map(|x| f.values()[grid.shifted(x, step)]).collect()
}

/// Forward difference `(f(x + a e_i) - f(x)) / a`.
pub fn forward_difference(f: &LatticeField, i: usize) -> LatticeField {
    let grid = f.grid();
    let up = shift_values(f, &unit(grid, i));
    let h = grid.spacing();
    LatticeField::new(grid, up.iter().zip(f.values()).map(|(u, v)| (u - v) / h).collect())
        .expect("grid length")
}

/// Backward difference `(f(x) - f(x - a e_i)) / a`.
pub fn backward_difference(f: &LatticeField, i: usize) -> LatticeField {
    let grid = f.grid();
    let down = shift_values(f, &unit(grid, i).iter().map(|s| -s).collect::<Vec<_>>());
    let h = grid.spacing();
    LatticeField::new(grid, f.values().iter().zip(&down).map(|(v, d)| (v - d) / h).collect())
        .expect("grid length")
}

pub fn grad(phi: &LatticeField) -> Vec<LatticeField> {
    (0..phi.grid().dim()).map(|i| forward_difference(phi, i)).collect()
}

pub fn div(e: &[LatticeField]) -> Result<LatticeField> {
    let grid = e.first().ok_or(Error::EmptyMask)?.grid().clone();
    check_components(&grid, e)?;
    let mut out = LatticeField::zeros(&grid);
    for (i, c) in e.iter().enumerate() {
        out = out.add(&backward_difference(c, i))?;
    }
    Ok(out)
}

/// Plaquette curl: one component for `d = 2`, three for `d = 3`.
pub fn curl(a: &[LatticeField]) -> Result<Vec<LatticeField>> {
    let grid = a.first().ok_or(Error::EmptyMask)?.grid().clone();
    check_dim(&grid)?;
    check_components(&grid, a)?;
    let c = |i: usize, j: usize| forward_difference(&a[j], i).sub(&forward_difference(&a[i], j));
    if grid.dim() == 2 {
        Ok(vec![c(0, 1)?])
    } else {
        Ok(vec![c(1, 2)?, c(2, 0)?, c(0, 1)?])
    }
}

fn kappa_table(grid: &LatticeGrid) -> Vec<Vec<Complex64>> {
    let h = grid.spacing();
    (0..grid.len())
        .map(|k| {
            grid.momentum(k)
                .into_iter()
                .map(|p| (Complex64::new(0.0, p * h).exp() - 1.0) / h)
                .collect()
        })
        .collect()
}

fn kappa_norm(kap: &[Complex64]) -> f64 {
    kap.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn transverse_mode(kap: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let k2: f64 = kap.iter().map(|z| z.norm_sqr()).sum();
    if k2 == 0.0 {
        return vec![Complex64::new(0.0, 0.0); v.len()];
    }
    let c: Complex64 = kap.iter().zip(v).map(|(k, x)| k.conj() * x).sum();
    kap.iter().zip(v).map(|(k, x)| x - k * c / k2).collect()
}

fn spectra(comps: &[LatticeField]) -> Vec<Vec<Complex64>> {
    comps.iter().map(|c| c.grid().fft_real(c.values())).collect()
}

fn mode(spec: &[Vec<Complex64>], k: usize) -> Vec<Complex64> {
    spec.iter().map(|s| s[k]).collect()
}

/// `P_T = 1 - κ κ^*/|κ|²`, with the zero mode sent to zero.
pub fn transverse_project(a: &[LatticeField]) -> Result<Vec<LatticeField>> {
    let grid = a.first().ok_or(Error::EmptyMask)?.grid().clone();
    check_components(&grid, a)?;
    let kap = kappa_table(&grid);
    let spec = spectra(a);
    let mut out = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; a.len()];
    for (k, kk) in kap.iter().enumerate() {
        for (i, z) in transverse_mode(kk, &mode(&spec, k)).into_iter().enumerate() {
            out[i][k] = z;
        }
    }
    out.into_iter()
        .map(|s| LatticeField::new(&grid, grid.ifft_real(s)))
        .collect()
}

/// `⟨g, |κ|^s h⟩` summed over components, zero mode dropped.
fn weighted_pairing(grid: &LatticeGrid, g: &[Vec<Complex64>], h: &[Vec<Complex64>], s: f64) -> f64 {
    let kap = kappa_table(grid);
    let mut acc = 0.0;
    for (k, kk) in kap.iter().enumerate() {
        let w = kappa_norm(kk);
        if w == 0.0 {
            continue;
        }
        let dot: f64 = g.iter().zip(h).map(|(x, y)| (x[k].conj() * y[k]).re).sum();
        acc += w.powf(s) * dot;
    }
    acc * grid.cell_volume() / grid.len() as f64
}

/// `‖g‖₋²` of a (not necessarily transverse) multi-component field.
pub fn minus_norm_sq(g: &[LatticeField]) -> Result<f64> {
    let grid = g.first().ok_or(Error::EmptyMask)?.grid().clone();
    for c in g {
        if c.grid() != &grid {
            return Err(Error::GridMismatch);
        }
    }
    let s = spectra(g);
    Ok(weighted_pairing(&grid, &s, &s, -1.0))
}

/// `[a] ⊕ e` with `div e = 0`.
#[derive(Clone, Debug)]
pub struct EMDatum {
    grid: LatticeGrid,
    pub a: Vec<LatticeField>,
    pub e: Vec<LatticeField>,
}

impl EMDatum {
    pub fn new(a: Vec<LatticeField>, e: Vec<LatticeField>) -> Result<Self> {
        let grid = a.first().ok_or(Error::EmptyMask)?.grid().clone();
        check_dim(&grid)?;
        check_components(&grid, &a)?;
        check_components(&grid, &e)?;
        let scale = e.iter().map(|c| c.max_abs()).fold(0.0, f64::max) / grid.spacing();
        let residual = div(&e)?.max_abs();
        if residual > DIVERGENCE_TOL * scale {
            return Err(Error::Precondition(format!(
                "electric field has divergence {residual:.3e}"
            )));
        }
        Ok(Self { grid, a, e })
    }

    pub fn zeros(grid: &LatticeGrid) -> Result<Self> {
        check_dim(grid)?;
        let z = vec![LatticeField::zeros(grid); grid.dim()];
        Ok(Self {
            grid: grid.clone(),
            a: z.clone(),
            e: z,
        })
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn magnetic(&self) -> Vec<LatticeField> {
        curl(&self.a).expect("validated components")
    }

    /// Same class with representative `a + grad φ`.
    pub fn gauge_shifted(&self, phi: &LatticeField) -> Result<Self> {
        if phi.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let a = self
            .a
            .iter()
            .zip(grad(phi))
            .map(|(x, g)| x.add(&g))
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: self.grid.clone(),
            a,
            e: self.e.clone(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let sum = |x: &[LatticeField], y: &[LatticeField]| {
            x.iter().zip(y).map(|(p, q)| p.add(q)).collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            grid: self.grid.clone(),
            a: sum(&self.a, &other.a)?,
            e: sum(&self.e, &other.e)?,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            a: self.a.iter().map(|c| c.scaled(s)).collect(),
            e: self.e.iter().map(|c| c.scaled(s)).collect(),
        }
    }
}

fn same(u: &EMDatum, v: &EMDatum) -> Result<()> {
    if u.grid != v.grid {
        return Err(Error::AmbientMismatch);
    }
    Ok(())
}

pub fn em_inner(u: &EMDatum, v: &EMDatum) -> Result<f64> {
    same(u, v)?;
    let pa = transverse_project(&u.a)?;
    let pb = transverse_project(&v.a)?;
    let g = &u.grid;
    Ok(weighted_pairing(g, &spectra(&pa), &spectra(&pb), 1.0)
        + weighted_pairing(g, &spectra(&u.e), &spectra(&v.e), -1.0))
}

pub fn em_norm(u: &EMDatum) -> Result<f64> {
    Ok(em_inner(u, u)?.max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct TwoFormNorms {
    /// `‖P_T a‖₊²`.
    pub transverse: f64,
    /// `‖curl a‖₋²`, with the curl taken from the stencil.
    pub magnetic: f64,
    pub electric: f64,
}

impl TwoFormNorms {
    pub fn relative_disagreement(&self) -> f64 {
        let s = self.transverse.abs().max(self.magnetic.abs());
        if s == 0.0 {
            0.0
        } else {
            (self.transverse - self.magnetic).abs() / s
        }
    }
}

pub fn two_form_norms(u: &EMDatum) -> Result<TwoFormNorms> {
    let pa = transverse_project(&u.a)?;
    let sp = spectra(&pa);
    Ok(TwoFormNorms {
        transverse: weighted_pairing(&u.grid, &sp, &sp, 1.0),
        magnetic: minus_norm_sq(&u.magnetic())?,
        electric: minus_norm_sq(&u.e)?,
    })
}

/// `⟨a₁, e₂⟩ - ⟨e₁, a₂⟩` with the quadrature weight.
pub fn em_symplectic(u: &EMDatum, v: &EMDatum) -> Result<f64> {
    same(u, v)?;
    let mut acc = 0.0;
    for i in 0..u.grid.dim() {
        acc += u.a[i].inner(&v.e[i])? - u.e[i].inner(&v.a[i])?;
    }
    Ok(acc)
}

/// Sites where some component of `curl a` exceeds `SUPPORT_TOL · max|a| / a`.
pub fn gauge_class_support(u: &EMDatum) -> SiteSet {
    let scale = u.a.iter().map(|c| c.max_abs()).fold(0.0, f64::max) / u.grid.spacing();
    let b = u.magnetic();
    let thr = SUPPORT_TOL * scale;
    let sites = (0..u.grid.len())
        .filter(|&x| b.iter().any(|c| c.values()[x].abs() > thr))
        .collect();
    SiteSet::new(&u.grid, sites).expect("sites in range")
}

/// Random transverse pair: `a` arbitrary, `e = P_T(noise)`.
pub fn random_em_datum(grid: &LatticeGrid, seed: u64) -> Result<EMDatum> {
    check_dim(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = || {
        (0..grid.dim())
            .map(|_| LatticeField::new(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect::<Result<Vec<_>>>()
    };
    let a = noise()?;
    let e = transverse_project(&noise()?)?;
    EMDatum::new(a, e)
}

fn kernel_block(grid: &LatticeGrid, chart: &SiteSet, s: f64) -> DMatrix<f64> {
    let d = grid.dim();
    let b = chart.len();
    let kap = kappa_table(grid);
    let mut e0 = vec![0.0; grid.len()];
    e0[0] = 1.0;
    let mut out = DMatrix::zeros(d * b, d * b);
    for i in 0..d {
        for j in 0..d {
            let ker = grid.apply_complex_multiplier(&e0, |k| {
                let kk = &kap[k];
                let w = kappa_norm(kk);
                if w == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let delta = if i == j { 1.0 } else { 0.0 };
                (Complex64::new(delta, 0.0) - kk[i] * kk[j].conj() / (w * w)) * w.powf(s)
            });
            let block = chart.circulant_block(&ker);
            out.view_mut((i * b, j * b), (b, b)).copy_from(&block);
        }
    }
    out * grid.cell_volume()
}

/// Columns of `basis` recombined along the eigenvectors of `basisᵀ G basis` whose
/// eigenvalues clear the null cutoff.
fn gram_filtered(basis: &DMatrix<f64>, gram: &DMatrix<f64>) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        return basis.clone();
    }
    let restricted = basis.tr_mul(&(gram * basis));
    let restricted = (&restricted + restricted.transpose()) * 0.5;
    let eig = SymmetricEigen::new(restricted);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > GRAM_NULL_TOL * lmax)
        .collect();
    let mut u = DMatrix::zeros(basis.ncols(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        u.set_column(c, &eig.eigenvectors.column(i));
    }
    basis * u
}

/// Orthonormal basis (Euclidean) of the link fields on `mask` with zero backward divergence.
fn divergence_free_basis(grid: &LatticeGrid, mask: &SiteSet) -> DMatrix<f64> {
    let d = grid.dim();
    let k = mask.len();
    let rows = mask.inflate(1);
    let h = grid.spacing();
    let cols = d * k;
    let nrows = rows.len().max(cols);
    let mut m = DMatrix::zeros(nrows, cols);
    for (r, &x) in mask.sites().iter().enumerate() {
        for i in 0..d {
            let col = i * k + r;
            m[(rows.rank(x).expect("inflated"), col)] += 1.0 / h;
            let up = grid.shifted(x, &unit(grid, i));
            m[(rows.rank(up).expect("inflated"), col)] -= 1.0 / h;
        }
    }
    let svd = SVD::new(m, false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= 1e-10 * smax)
        .collect();
    let mut out = DMatrix::zeros(cols, null.len());
    for (c, &i) in null.iter().enumerate() {
        out.set_column(c, &vt.row(i).transpose());
    }
    out
}

/// Chart coordinates `[a_1|_chart, …, a_d|_chart, e_1|_chart, …, e_d|_chart]`.
#[derive(Debug, Clone)]
pub struct EmAmbient {
    grid: LatticeGrid,
    chart: SiteSet,
    space: Arc<SymplecticSpace>,
}

impl EmAmbient {
    pub fn new(grid: &LatticeGrid, chart: &SiteSet, tol: Tolerances) -> Result<Self> {
        check_dim(grid)?;
        if chart.is_empty() {
            return Err(Error::EmptyMask);
        }
        if chart.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let g0 = kernel_block(grid, chart, 1.0);
        let g1 = kernel_block(grid, chart, -1.0);
        Ok(Self {
            grid: grid.clone(),
            chart: chart.clone(),
            space: SymplecticSpace::new(g0, g1, grid.cell_volume(), tol)?,
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

    pub fn to_vector(&self, u: &EMDatum) -> Result<DVector<f64>> {
        if u.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let b = self.chart.len();
        let d = self.grid.dim();
        let mut v = DVector::zeros(2 * d * b);
        for (blk, comps) in [&u.a, &u.e].into_iter().enumerate() {
            for (i, c) in comps.iter().enumerate() {
                for (x, &val) in c.values().iter().enumerate() {
                    if val == 0.0 {
                        continue;
                    }
                    let r = self.chart.rank(x).ok_or_else(|| {
                        Error::Precondition(format!("datum is supported outside the chart at site {x}"))
                    })?;
                    v[blk * d * b + i * b + r] = val;
                }
            }
        }
        Ok(v)
    }

    pub fn to_datum(&self, v: &DVector<f64>) -> EMDatum {
        let b = self.chart.len();
        let d = self.grid.dim();
        let comp = |blk: usize, i: usize| {
            let mut vals = vec![0.0; self.grid.len()];
            for (r, &s) in self.chart.sites().iter().enumerate() {
                vals[s] = v[blk * d * b + i * b + r];
            }
            LatticeField::new(&self.grid, vals).expect("grid length")
        };
        EMDatum {
            grid: self.grid.clone(),
            a: (0..d).map(|i| comp(0, i)).collect(),
            e: (0..d).map(|i| comp(1, i)).collect(),
        }
    }

    /// Classes of link fields on the mask together with divergence-free link fields on the
    /// mask. Pure-gauge directions are removed before orthonormalization.
    pub fn local_subspace(&self, mask: &SiteSet) -> Result<Subspace> {
        if mask.is_empty() {
            return Err(Error::EmptyMask);
        }
        if !mask.is_subset(&self.chart) {
            return Err(Error::Containment { residual: 1.0 });
        }
        let d = self.grid.dim();
        let b = self.chart.len();
        let k = mask.len();
        let ranks: Vec<usize> = mask.sites().iter().map(|&s| self.chart.rank(s).expect("subset")).collect();
        let embed = |local: &DMatrix<f64>, blk: usize, out: &mut DMatrix<f64>, offset: usize| {
            for c in 0..local.ncols() {
                for i in 0..d {
                    for (r, &cr) in ranks.iter().enumerate() {
                        out[(blk * d * b + i * b + cr, offset + c)] = local[(i * k + r, c)];
                    }
                }
            }
        };
        let gram = self.space.gram();
        let local_gram = |blk: usize| {
            let idx: Vec<usize> = (0..d)
                .flat_map(|i| ranks.iter().map(move |&r| blk * d * b + i * b + r))
                .collect();
            gram.select_rows(&idx).select_columns(&idx)
        };
        let gauge = gram_filtered(&DMatrix::identity(d * k, d * k), &local_gram(0));
        let electric = gram_filtered(&divergence_free_basis(&self.grid, mask), &local_gram(1));
        let mut gens = DMatrix::zeros(2 * d * b, gauge.ncols() + electric.ncols());
        embed(&gauge, 0, &mut gens, 0);
        embed(&electric, 1, &mut gens, gauge.ncols());
        self.space.span(&gens)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EmDualityReport {
    pub region_sites: usize,
    pub complement_sites: usize,
    pub ambient_dim: usize,
    pub region_dim: usize,
    pub complement_dim: usize,
    pub radical_dim: usize,
    pub gap_forward: f64,
    pub gap_dual: f64,
    pub separation_rings: usize,
    pub note: String,
}

/// Relative duality of `H(B)` and `H(M ∖ B)` inside `H(M)`, each joined with the radical
/// of `σ` on `H(M)`; the radical is spanned by restricted gradients `[grad φ|_M]`.
pub fn em_duality_check(grid: &LatticeGrid, b: &SiteSet, m: &SiteSet, tol: Tolerances) -> Result<EmDualityReport> {
    if b.is_empty() {
        return Err(Error::EmptyMask);
    }
    if !b.is_subset(m) {
        return Err(Error::Containment { residual: 1.0 });
    }
    let amb = EmAmbient::new(grid, m, tol)?;
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
    Ok(EmDualityReport {
        region_sites: b.len(),
        complement_sites: c.len(),
        ambient_dim: hm.dim(),
        region_dim: hb.dim(),
        complement_dim: hc.dim(),
        radical_dim: rad.dim(),
        gap_forward: subspace_gap(&hc_perp, &hb.join(&rad)?)?,
        gap_dual: subspace_gap(&hb_perp, &hc.join(&rad)?)?,
        separation_rings: 0,
        note: "exact site partition of M; link generators of B and M \\ B are disjoint, \
               one-ring curl leakage only affects the magnetic view"
            .into(),
    })
}

/// Enveloping-space pair `(b, e)` without the transversality constraint.
#[derive(Clone, Debug)]
pub struct FieldPair {
    pub b: Vec<LatticeField>,
    pub e: Vec<LatticeField>,
}

impl FieldPair {
    pub fn norm(&self) -> Result<f64> {
        Ok((minus_norm_sq(&self.b)? + minus_norm_sq(&self.e)?).max(0.0).sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.b.iter().chain(&self.e).map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.b.iter().chain(&self.e).flat_map(|c| c.exact_support()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[derive(Clone, Debug)]
pub struct ChiSplit {
    pub inside: FieldPair,
    pub outside: FieldPair,
}

/// `(χ b, χ e)` and `((1 - χ) b, (1 - χ) e)` for `b = curl a`.
pub fn chi_split(u: &EMDatum, chi: &LatticeField) -> Result<ChiSplit> {
    if chi.grid() != &u.grid {
        return Err(Error::GridMismatch);
    }
    if chi.values().iter().any(|&c| !(-1e-12..=1.0 + 1e-12).contains(&c)) {
        return Err(Error::InvalidParameter("χ must take values in [0, 1]".into()));
    }
    let inner = |comps: &[LatticeField]| comps.iter().map(|c| c.mul(chi)).collect::<Result<Vec<_>>>();
    let outer = |comps: &[LatticeField]| {
        comps
            .iter()
            .map(|c| c.zip_with(chi, |x, k| x * (1.0 - k)))
            .collect::<Result<Vec<_>>>()
    };
    let b = u.magnetic();
    Ok(ChiSplit {
        inside: FieldPair {
            b: inner(&b)?,
            e: inner(&u.e)?,
        },
        outside: FieldPair {
            b: outer(&b)?,
            e: outer(&u.e)?,
        },
    })
}

/// `sup ‖χ g‖₋ / ‖g‖₋` estimated by power iteration with the `|κ|` dispersion.
pub fn chi_minus_norm_estimate(chi: &LatticeField) -> Result<f64> {
    let grid = chi
        .grid()
        .with_mass(0.0)?
        .with_dispersion(Dispersion::Lattice);
    let chi = LatticeField::new(&grid, chi.values().to_vec())?;
    Ok(mult_operator_norm_estimate(&chi, Sign::Minus, PowerIteration::default()).value)
}

/// Sites in `φ(A)`: points of the flat basis `B₁` whose preimage under the conformal map
/// lies in the boost cap `{(u, v) > 1 - ε}` of the hyperboloid.
pub fn boost_region_mask(grid: &LatticeGrid, map: &ConformalMap, v: &[f64], epsilon: f64) -> Result<(SiteSet, SiteSet)> {
    if v.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: v.len(),
        });
    }
    let radius = map.basis_radius();
    if radius >= grid.extent() / 2.0 {
        return Err(Error::Wraparound(format!("basis radius {radius} exceeds half the box")));
    }
    let ball = SiteSet::ball(grid, &vec![0.0; grid.dim()], radius);
    let c = map.hyperboloid_parameter();
    let mut sites = vec![];
    for &s in ball.sites() {
        let z = Point::from_parts(map.basis_time(), &grid.position(s));
        let x = map.inverse(&z)?;
        if boost_cap_contains(c, v, epsilon, &x)? {
            sites.push(s);
        }
    }
    let b = SiteSet::new(grid, sites)?;
    if b.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok((b, ball))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoostRegionReport {
    pub epsilon: f64,
    pub direction: Vec<f64>,
    pub mask_sites: usize,
    pub basis_sites: usize,
    pub duality: EmDualityReport,
    pub boundary_datum_norm: f64,
    /// `‖outside‖ / ‖u‖` for a datum on the inner boundary ring of `B`.
    pub chi_remainder: f64,
    pub chi_inside_norm: f64,
    pub chi_norm_estimate: f64,
    pub chi_support_ok: bool,
}

/// Sites of `B` having a Chebyshev neighbour outside `B`.
pub fn boundary_ring(b: &SiteSet) -> SiteSet {
    let grid = b.grid();
    let steps = grid.chebyshev_ball(1);
    let sites = b
        .sites()
        .iter()
        .copied()
        .filter(|&x| steps.iter().any(|st| !b.contains(grid.shifted(x, st))))
        .collect();
    SiteSet::new(grid, sites).expect("sites in range")
}

/// Random datum supported on the mask: arbitrary `a`, divergence-free `e`.
pub fn random_local_em_datum(grid: &LatticeGrid, mask: &SiteSet, seed: u64) -> Result<EMDatum> {
    check_dim(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let k = mask.len();
    let mut a = vec![vec![0.0; grid.len()]; d];
    for comp in a.iter_mut() {
        for &s in mask.sites() {
            comp[s] = rng.gen_range(-1.0..1.0);
        }
    }
    let basis = divergence_free_basis(grid, mask);
    let coeff = DVector::from_fn(basis.ncols(), |_, _| rng.gen_range(-1.0..1.0));
    let local = &basis * coeff;
    let mut e = vec![vec![0.0; grid.len()]; d];
    for (i, comp) in e.iter_mut().enumerate() {
        for (r, &s) in mask.sites().iter().enumerate() {
            comp[s] = local[i * k + r];
        }
    }
    let wrap = |v: Vec<Vec<f64>>| v.into_iter().map(|c| LatticeField::new(grid, c)).collect::<Result<Vec<_>>>();
    EMDatum::new(wrap(a)?, wrap(e)?)
}

/// Conformal-image mask, duality inside the flat basis ball, and the `χ` splitting of a
/// datum on the inner boundary ring with `χ = 1_{B + 3 rings} ∗ ρ`, `ρ` a bump of radius `2a`.
pub fn boost_region_duality(
    grid: &LatticeGrid,
    map: &ConformalMap,
    v: &[f64],
    epsilon: f64,
    tol: Tolerances,
) -> Result<BoostRegionReport> {
    check_dim(grid)?;
    let (b, ball) = boost_region_mask(grid, map, v, epsilon)?;
    let duality = em_duality_check(grid, &b, &ball, tol)?;
    let ring = boundary_ring(&b);
    let u = random_local_em_datum(grid, &ring, 0xb0057)?;
    let chi = convolve_direct(&b.inflate(3).indicator(), &bump(grid, 2.0 * grid.spacing())?)?;
    let chi = chi.map(|x| x.clamp(0.0, 1.0));
    let split = chi_split(&u, &chi)?;
    let whole = FieldPair {
        b: u.magnetic(),
        e: u.e.clone(),
    };
    let norm = whole.norm()?;
    let inside_support: SiteSet = SiteSet::new(grid, split.inside.support())?;
    let expected = SiteSet::new(grid, chi.exact_support())?.intersection(&SiteSet::new(grid, whole.support())?)?;
    Ok(BoostRegionReport {
        epsilon,
        direction: v.to_vec(),
        mask_sites: b.len(),
        basis_sites: ball.len(),
        duality,
        boundary_datum_norm: norm,
        chi_remainder: split.outside.norm()? / norm,
        chi_inside_norm: split.inside.norm()?,
        chi_norm_estimate: chi_minus_norm_estimate(&chi)?,
        chi_support_ok: inside_support.is_subset(&expected),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_field(grid: &LatticeGrid, seed: u64) -> LatticeField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LatticeField::new(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn grids() -> Vec<LatticeGrid> {
        vec![
            LatticeGrid::new(2, 16, 0.5, 0.0).unwrap(),
            LatticeGrid::new(3, 4, 1.0, 0.0).unwrap(),
        ]
    }

    #[test]
    fn stencil_identities() {
        for g in grids() {
            let phi = random_field(&g, 1);
            let gr = grad(&phi);
            assert!(curl(&gr).unwrap().iter().all(|c| c.max_abs() < 1e-12));
            let pt = transverse_project(&gr).unwrap();
            assert!(pt.iter().all(|c| c.max_abs() < 1e-12));
            let a: Vec<_> = (0..g.dim()).map(|i| random_field(&g, 10 + i as u64)).collect();
            let p = transverse_project(&a).unwrap();
            let pp = transverse_project(&p).unwrap();
            for (x, y) in p.iter().zip(&pp) {
                assert!(x.sub(y).unwrap().max_abs() < 1e-12);
            }
            assert!(div(&p).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn transverse_mode_norm() {
        let g = LatticeGrid::new(2, 16, 0.25, 0.0).unwrap();
        let p1 = 3.0 * g.momentum_step();
        let c = LatticeField::from_fn(&g, |x| (p1 * x[0]).cos());
        let u = EMDatum::new(vec![LatticeField::zeros(&g), c.clone()], vec![LatticeField::zeros(&g); 2]).unwrap();
        let kappa = 2.0 / g.spacing() * (0.5 * p1 * g.spacing()).sin();
        let n = em_inner(&u, &u).unwrap();
        assert!((n - kappa * c.norm().powi(2)).abs() < 1e-10 * n);
    }

    #[test]
    fn pure_gauge_is_the_zero_class() {
        for g in grids() {
            let phi = random_field(&g, 4);
            let u = EMDatum::new(grad(&phi), vec![LatticeField::zeros(&g); g.dim()]).unwrap();
            assert!(em_inner(&u, &u).unwrap().abs() < 1e-20);
            assert!(gauge_class_support(&u).is_empty());
        }
    }

    #[test]
    fn rejects_divergent_electric_fields() {
        let g = LatticeGrid::new(2, 8, 1.0, 0.0).unwrap();
        let z = LatticeField::zeros(&g);
        let e = vec![LatticeField::delta(&g, 3), z.clone()];
        assert!(matches!(EMDatum::new(vec![z.clone(), z], e), Err(Error::Precondition(_))));
        assert!(EMDatum::zeros(&LatticeGrid::new(1, 8, 1.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn plaquette_pairing_by_hand() {
        let g = LatticeGrid::new(2, 8, 0.5, 0.0).unwrap();
        let x = g.index_signed(&[0, 0]);
        let x1 = g.index_signed(&[1, 0]);
        let x2 = g.index_signed(&[0, 1]);
        let mut e1 = vec![0.0; g.len()];
        let mut e2 = vec![0.0; g.len()];
        e1[x] = 1.0;
        e2[x1] = 1.0;
        e1[x2] = -1.0;
        e2[x] = -1.0;
        let z = LatticeField::zeros(&g);
        let loop_ = EMDatum::new(
            vec![z.clone(), z.clone()],
            vec![LatticeField::new(&g, e1).unwrap(), LatticeField::new(&g, e2).unwrap()],
        )
        .unwrap();
        let a = EMDatum::new(
            vec![LatticeField::delta(&g, x), LatticeField::delta(&g, x).scaled(2.0)],
            vec![z.clone(), z],
        )
        .unwrap();
        let s = em_symplectic(&a, &loop_).unwrap();
        // Lattice deltas carry 1/a^d, so the two-term sum is a^d · a^{-d} · (1 - 2).
        assert!((s + 1.0).abs() < 1e-14);
        assert!((em_symplectic(&loop_, &a).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn magnetic_support_widens_by_at_most_one_ring() {
        let g = LatticeGrid::new(2, 16, 1.0, 0.0).unwrap();
        let b = SiteSet::ball(&g, &[0.0, 0.0], 3.0);
        let u = random_local_em_datum(&g, &b, 3).unwrap();
        let s = gauge_class_support(&u);
        assert!(!s.is_empty());
        assert!(s.is_subset(&b.inflate(1)));
        let shifted = u.gauge_shifted(&random_field(&g, 8)).unwrap();
        assert_eq!(gauge_class_support(&shifted), s);
    }

    #[test]
    fn full_mask_counts_transverse_modes() {
        for (d, n) in [(2usize, 8usize), (3, 4)] {
            let g = LatticeGrid::new(d, n, 1.0, 0.0).unwrap();
            let full = SiteSet::full(&g);
            let amb = EmAmbient::new(&g, &full, Tolerances::default()).unwrap();
            let h = amb.local_subspace(&full).unwrap();
            assert_eq!(h.dim(), 2 * (d - 1) * (g.len() - 1));
            assert!(h.orthonormality_error() < 1e-9);
        }
    }

    #[test]
    fn chart_reproduces_spectral_forms() {
        for g in grids() {
            let full = SiteSet::full(&g);
            let amb = EmAmbient::new(&g, &full, Tolerances::default()).unwrap();
            let u = random_em_datum(&g, 5).unwrap();
            let v = random_em_datum(&g, 6).unwrap();
            let (x, y) = (amb.to_vector(&u).unwrap(), amb.to_vector(&v).unwrap());
            let e = em_inner(&u, &v).unwrap();
            assert!((amb.space().energy(&x, &y) - e).abs() < 1e-10 * (1.0 + e.abs()));
            let s = em_symplectic(&u, &v).unwrap();
            assert!((amb.space().sigma(&x, &y) - s).abs() < 1e-10 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn nesting_and_gauge_generators() {
        let g = LatticeGrid::new(2, 16, 1.0, 0.0).unwrap();
        let chart = SiteSet::cube(&g, &[0.0, 0.0], 5.0);
        let amb = EmAmbient::new(&g, &chart, Tolerances::default()).unwrap();
        let small = amb.local_subspace(&SiteSet::ball(&g, &[0.0, 0.0], 2.5)).unwrap();
        let big = amb.local_subspace(&SiteSet::ball(&g, &[0.0, 0.0], 4.0)).unwrap();
        assert!(big.excess(&small).unwrap() < 1e-8);
        let mask = SiteSet::ball(&g, &[0.0, 0.0], 3.0);
        let h = amb.local_subspace(&mask).unwrap();
        let phi = LatticeField::indicator(&g, SiteSet::ball(&g, &[0.0, 0.0], 1.5).sites());
        let pure = EMDatum::new(grad(&phi), vec![LatticeField::zeros(&g); 2]).unwrap();
        let x = amb.to_vector(&pure).unwrap();
        assert!(amb.space().energy(&x, &x).abs() < 1e-12 * x.norm_squared());
        let mut gens = h.basis().clone().insert_column(h.dim(), 0.0);
        gens.set_column(h.dim(), &x);
        let widened = amb.space().span(&gens).unwrap();
        assert_eq!(widened.dim(), h.dim());
        assert!(subspace_gap(&widened, &h).unwrap() < 1e-10);
    }

    #[test]
    fn duality_in_two_and_three_dimensions() {
        let g = LatticeGrid::new(2, 16, 1.0, 0.0).unwrap();
        let m = SiteSet::cube(&g, &[0.0, 0.0], 4.0);
        let b = SiteSet::ball(&g, &[0.0, 0.0], 2.5);
        let rep = em_duality_check(&g, &b, &m, Tolerances::default()).unwrap();
        assert!(rep.gap_forward < 1e-6 && rep.gap_dual < 1e-6, "{rep:?}");
        assert!(rep.radical_dim > 0);
        let moved = em_duality_check(&g, &b.translated(&[2, 3]), &m.translated(&[2, 3]), Tolerances::default()).unwrap();
        assert!((moved.gap_forward - rep.gap_forward).abs() < 1e-6);
        assert_eq!(moved.region_dim, rep.region_dim);
        let trivial = em_duality_check(&g, &m, &m, Tolerances::default()).unwrap();
        assert!(trivial.gap_forward < 1e-8 && trivial.complement_dim == 0);

        let g = LatticeGrid::new(3, 8, 1.0, 0.0).unwrap();
        let m = SiteSet::cube(&g, &[0.0, 0.0, 0.0], 2.0);
        let b = SiteSet::ball(&g, &[0.0, 0.0, 0.0], 1.5);
        let rep = em_duality_check(&g, &b, &m, Tolerances::default()).unwrap();
        assert!(rep.gap_forward < 1e-6 && rep.gap_dual < 1e-6, "{rep:?}");
    }

    #[test]
    fn chi_split_is_additive_and_respects_supports() {
        let g = LatticeGrid::new(2, 16, 1.0, 0.0).unwrap();
        let u = random_local_em_datum(&g, &SiteSet::ball(&g, &[0.0, 0.0], 3.0), 9).unwrap();
        let one = LatticeField::constant(&g, 1.0);
        let s = chi_split(&u, &one).unwrap();
        assert_eq!(s.outside.max_abs(), 0.0);
        let chi = convolve_direct(&SiteSet::ball(&g, &[1.0, 0.0], 2.0).indicator(), &bump(&g, 2.0).unwrap()).unwrap();
        let s = chi_split(&u, &chi).unwrap();
        let b = u.magnetic();
        for (i, bc) in b.iter().enumerate() {
            let sum = s.inside.b[i].add(&s.outside.b[i]).unwrap();
            assert!(sum.sub(bc).unwrap().max_abs() < 1e-14);
        }
        let whole = FieldPair { b, e: u.e.clone() };
        let allowed = SiteSet::new(&g, chi.exact_support())
            .unwrap()
            .intersection(&SiteSet::new(&g, whole.support()).unwrap())
            .unwrap();
        assert!(SiteSet::new(&g, s.inside.support()).unwrap().is_subset(&allowed));
        let bound = chi_minus_norm_estimate(&chi).unwrap();
        assert!(s.inside.norm().unwrap() <= 1.05 * bound * whole.norm().unwrap());
        assert!(chi_split(&u, &one.scaled(2.0)).is_err());
    }

    #[test]
    fn boost_region_masks_and_symmetry() {
        let g = LatticeGrid::new(2, 32, 1.0, 0.0).unwrap();
        let map = ConformalMap::new(16.0).unwrap();
        let (b, ball) = boost_region_mask(&g, &map, &[1.0, 0.0], 0.5).unwrap();
        assert!(b.is_subset(&ball) && b.len() < ball.len());
        let (r, _) = boost_region_mask(&g, &map, &[0.0, 1.0], 0.5).unwrap();
        assert_eq!(r.len(), b.len());
        let (wide, _) = boost_region_mask(&g, &map, &[1.0, 0.0], 0.9999).unwrap();
        assert!(b.is_subset(&wide));
        let (thin, _) = boost_region_mask(&g, &map, &[1.0, 0.0], 0.1).unwrap();
        assert!(thin.is_subset(&b));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn forms_are_gauge_invariant(seed in 0u64..10_000) {
            for g in grids() {
                let u = random_em_datum(&g, seed).unwrap();
                let v = random_em_datum(&g, seed + 1).unwrap();
                let phi = random_field(&g, seed + 2);
                let us = u.gauge_shifted(&phi).unwrap();
                let e = em_inner(&u, &v).unwrap();
                prop_assert!((em_inner(&us, &v).unwrap() - e).abs() < 1e-10 * (1.0 + e.abs()));
                let s = em_symplectic(&u, &v).unwrap();
                prop_assert!((em_symplectic(&us, &v).unwrap() - s).abs() < 1e-10 * (1.0 + s.abs()));
                prop_assert!((s + em_symplectic(&v, &u).unwrap()).abs() < 1e-12 * (1.0 + s.abs()));
                prop_assert!(em_symplectic(&u, &u).unwrap().abs() < 1e-12);
                let t = two_form_norms(&u).unwrap();
                prop_assert!(t.relative_disagreement() < 1e-10);
                prop_assert!(em_inner(&u, &u).unwrap() > 0.0);
            }
        }
    }
}
