//! Truncated bosonic Fock space over `ℂ^n`.
//!
//! Conventions: `Φ(f) = Σ_i conj(f_i) a_i + f_i a_i†`, so that `⟨Ω, Φ(f) Φ(g) Ω⟩ = ⟨f, g⟩`
//! with `⟨f, g⟩ = Σ conj(f_i) g_i`, real part the energy inner product and imaginary part
//! `σ(f, g)`. Then `[Φ(f), Φ(g)] = 2iσ(f, g)`, `W(f) = exp(iΦ(f))` and
//! `W(f) W(g) = e^{-iσ(f, g)} W(f + g)`.
//!
//! The basis is cut at total occupation `K`. Operator comparisons are made on the block of
//! states with total occupation at most `K / 2`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_MODES: usize = 4;
pub const MAX_COMMUTANT_MODES: usize = 2;
pub const MAX_COMMUTANT_CUTOFF: usize = 10;

pub type CMatrix = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `⟨f, g⟩`, antilinear in `f`.
pub fn one_particle_inner(f: &[Complex64], g: &[Complex64]) -> Complex64 {
    f.iter().zip(g).map(|(a, b)| a.conj() * b).sum()
}

pub fn one_particle_sigma(f: &[Complex64], g: &[Complex64]) -> f64 {
    one_particle_inner(f, g).im
}

pub fn one_particle_norm(f: &[Complex64]) -> f64 {
    one_particle_inner(f, f).re.max(0.0).sqrt()
}

fn occupations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut cur = vec![0usize; n];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for m in 0..=left {
            cur[i] = m;
            rec(i + 1, left - m, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, k, &mut cur, &mut out);
    out.sort_by_key(|o| (o.iter().sum::<usize>(), o.clone()));
    out
}

#[derive(Clone, Debug)]
pub struct FockContext {
    n_modes: usize,
    cutoff: usize,
    states: Vec<Vec<usize>>,
    lowering: Vec<CMatrix>,
}

impl FockContext {
    pub fn new(n_modes: usize, cutoff: usize) -> Result<Self> {
        if n_modes == 0 || n_modes > MAX_MODES {
            return Err(Error::InvalidParameter(format!(
                "number of modes must be in 1..={MAX_MODES}, got {n_modes}"
            )));
        }
        if cutoff < 2 {
            return Err(Error::InvalidParameter("occupation cutoff must be at least 2".into()));
        }
        let states = occupations(n_modes, cutoff);
        let index: HashMap<Vec<usize>, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let dim = states.len();
        let lowering = (0..n_modes)
            .map(|i| {
                let mut a = CMatrix::zeros(dim, dim);
                for (col, s) in states.iter().enumerate() {
                    if s[i] > 0 {
                        let mut t = s.clone();
                        t[i] -= 1;
                        a[(index[&t], col)] = c((s[i] as f64).sqrt());
                    }
                }
                a
            })
            .collect();
        Ok(Self {
            n_modes,
            cutoff,
            states,
            lowering,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn lowering(&self, i: usize) -> &CMatrix {
        &self.lowering[i]
    }

    pub fn raising(&self, i: usize) -> CMatrix {
        self.lowering[i].adjoint()
    }

    /// Indices of states with total occupation at most `K / 2`.
    pub fn low_block(&self) -> Vec<usize> {
        let cap = self.cutoff / 2;
        (0..self.dim()).filter(|&i| self.states[i].iter().sum::<usize>() <= cap).collect()
    }

    fn check(&self, f: &[Complex64]) -> Result<()> {
        if f.len() != self.n_modes {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes,
                found: f.len(),
            });
        }
        Ok(())
    }

    pub fn field_operator(&self, f: &[Complex64]) -> Result<CMatrix> {
        self.check(f)?;
        let mut phi = CMatrix::zeros(self.dim(), self.dim());
        for (i, &fi) in f.iter().enumerate() {
            phi += &self.lowering[i] * fi.conj() + self.raising(i) * fi;
        }
        Ok(phi)
    }

    pub fn weyl(&self, f: &[Complex64]) -> Result<CMatrix> {
        let phi = self.field_operator(f)?;
        let eig = SymmetricEigen::new(phi);
        let u = eig.eigenvectors;
        let phases = DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&l| Complex64::new(0.0, l).exp()),
        );
        Ok(&u * CMatrix::from_diagonal(&phases) * u.adjoint())
    }

    pub fn vacuum_expectation(&self, op: &CMatrix) -> Complex64 {
        op[(0, 0)]
    }

    /// Spectral norm of the low-block restriction.
    pub fn low_block_norm(&self, op: &CMatrix) -> f64 {
        let idx = self.low_block();
        let sub = op.select_rows(&idx).select_columns(&idx);
        sub.singular_values().iter().fold(0.0f64, |a, &b| a.max(b))
    }

    /// `‖W(f) W(g) - e^{-iσ(f, g)} W(f + g)‖` on the low block.
    pub fn weyl_relation_residual(&self, f: &[Complex64], g: &[Complex64]) -> Result<f64> {
        let sum: Vec<Complex64> = f.iter().zip(g).map(|(a, b)| a + b).collect();
        let phase = Complex64::new(0.0, -one_particle_sigma(f, g)).exp();
        let lhs = self.weyl(f)? * self.weyl(g)?;
        Ok(self.low_block_norm(&(lhs - self.weyl(&sum)? * phase)))
    }

    pub fn unitarity_residual(&self, f: &[Complex64]) -> Result<f64> {
        let w = self.weyl(f)?;
        let id = CMatrix::identity(self.dim(), self.dim());
        Ok(self.low_block_norm(&(w.adjoint() * &w - id)))
    }

    pub fn commutation_vs_symplectic(&self, f: &[Complex64], g: &[Complex64]) -> Result<CommutationReport> {
        let wf = self.weyl(f)?;
        let wg = self.weyl(g)?;
        let sigma = one_particle_sigma(f, g);
        let gf = &wg * &wf;
        let comm = &wf * &wg - &gf;
        let predicted = &gf * (Complex64::new(0.0, -2.0 * sigma).exp() - 1.0);
        let measured_norm = self.low_block_norm(&comm);
        let predicted_norm = self.low_block_norm(&predicted);
        Ok(CommutationReport {
            sigma,
            measured_norm,
            predicted_norm,
            operator_residual: self.low_block_norm(&(comm - predicted)),
            low_block_size: self.low_block().len(),
            cutoff: self.cutoff,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CommutationReport {
    pub sigma: f64,
    pub measured_norm: f64,
    pub predicted_norm: f64,
    pub operator_residual: f64,
    pub low_block_size: usize,
    pub cutoff: usize,
}

impl CommutationReport {
    pub fn disagreement(&self) -> f64 {
        (self.measured_norm - self.predicted_norm).abs()
    }
}

fn realify(v: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(2 * v.len(), v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)))
}

fn complexify(x: &DVector<f64>) -> Vec<Complex64> {
    let n = x.len() / 2;
    (0..n).map(|i| Complex64::new(x[i], x[n + i])).collect()
}

/// Real-linear span of vectors in `ℂ^n`.
#[derive(Clone, Debug)]
pub struct RealSubspace {
    n: usize,
    basis: Vec<Vec<Complex64>>,
}

impl RealSubspace {
    pub fn new(n: usize, vectors: Vec<Vec<Complex64>>) -> Result<Self> {
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: vectors.iter().map(|v| v.len()).find(|&l| l != n).unwrap_or(n),
            });
        }
        if !vectors.is_empty() {
            let m = DMatrix::from_columns(&vectors.iter().map(|v| realify(v)).collect::<Vec<_>>());
            let sv = m.singular_values();
            let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
            if sv.iter().any(|&s| s <= 1e-10 * smax) {
                return Err(Error::InvalidParameter("generators are not independent over ℝ".into()));
            }
        }
        Ok(Self { n, basis: vectors })
    }

    pub fn full(n: usize) -> Self {
        let mut basis = vec![];
        for i in 0..n {
            let mut e = vec![c(0.0); n];
            e[i] = c(1.0);
            basis.push(e.clone());
            e[i] = Complex64::new(0.0, 1.0);
            basis.push(e);
        }
        Self { n, basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<Complex64>] {
        &self.basis
    }

    fn matrix(&self) -> DMatrix<f64> {
        if self.basis.is_empty() {
            return DMatrix::zeros(2 * self.n, 0);
        }
        DMatrix::from_columns(&self.basis.iter().map(|v| realify(v)).collect::<Vec<_>>())
    }

    pub fn contains(&self, other: &RealSubspace) -> bool {
        if other.dim() == 0 {
            return true;
        }
        let a = self.matrix();
        let mut joined = DMatrix::zeros(2 * self.n, a.ncols() + other.dim());
        joined.columns_mut(0, a.ncols()).copy_from(&a);
        joined.columns_mut(a.ncols(), other.dim()).copy_from(&other.matrix());
        real_rank(&joined) == real_rank(&a)
    }

    /// `{h ∈ self : σ(h, v) = 0 for all v ∈ V}`.
    pub fn symplectic_complement_of(&self, v: &RealSubspace) -> RealSubspace {
        let h = self.matrix();
        if h.ncols() == 0 {
            return RealSubspace { n: self.n, basis: vec![] };
        }
        let mut cons = DMatrix::zeros(v.dim().max(h.ncols()), h.ncols());
        for (r, vv) in v.basis.iter().enumerate() {
            for (col, hh) in self.basis.iter().enumerate() {
                cons[(r, col)] = one_particle_sigma(hh, vv);
            }
        }
        let coeffs = null_space(&cons, 1e-10);
        let basis = (0..coeffs.ncols())
            .map(|j| complexify(&(&h * coeffs.column(j))))
            .collect();
        RealSubspace { n: self.n, basis }
    }
}

fn real_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.singular_values();
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    sv.iter().filter(|&&s| s > 1e-10 * smax).count()
}

/// Orthonormal null space of a real matrix with at least as many rows as columns.
fn null_space(m: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let svd = SVD::new(m.clone(), false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= rel * smax)
        .collect();
    let mut out = DMatrix::zeros(m.ncols(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &vt.row(i).transpose());
    }
    out
}

fn complex_rank(cols: &[DVector<Complex64>], rel: f64) -> (usize, f64) {
    if cols.is_empty() {
        return (0, 1.0);
    }
    let m = CMatrix::from_columns(cols);
    let sv = m.singular_values();
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let kept: Vec<f64> = sv.iter().copied().filter(|&s| s > rel * smax).collect();
    let smin = kept.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    (kept.len(), if kept.is_empty() { f64::INFINITY } else { smax / smin })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CommutantReport {
    pub cutoff: usize,
    pub low_block_size: usize,
    pub samples: usize,
    /// Dimension of the Weyl-sample span over `H` commuting with `W(V)`.
    pub commutant_dim: usize,
    /// Dimension of the Weyl-sample span over `V^c ∩ H`.
    pub complement_dim: usize,
    pub difference: i64,
    pub constraint_condition: f64,
    pub sample_condition: f64,
}

/// Compares, on the low block, the operators `X = Σ c_s W(s)` over a sample grid `s` of `H`
/// that commute with `W(v)` for the generators `v` of `V`, with the span of `W(s)` over the
/// samples lying in `V^c = {h ∈ H : σ(h, V) = 0}`. The grid is `{-t, 0, t}` along a basis of
/// `H` adapted to `V^c`, so both counts refer to the same samples.
pub fn relative_commutant_dims(ctx: &FockContext, v: &RealSubspace, h: &RealSubspace, step: f64) -> Result<CommutantReport> {
    if ctx.n_modes() > MAX_COMMUTANT_MODES || ctx.cutoff() > MAX_COMMUTANT_CUTOFF {
        return Err(Error::Budget {
            required: ctx.dim(),
            budget: occupations(MAX_COMMUTANT_MODES, MAX_COMMUTANT_CUTOFF).len(),
        });
    }
    if v.n != ctx.n_modes() || h.n != ctx.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: ctx.n_modes(),
            found: v.n,
        });
    }
    if !h.contains(v) {
        return Err(Error::NotNested("V is not contained in H".into()));
    }
    let vc = h.symplectic_complement_of(v);
    // Adapted basis: V^c first, then a complement inside H.
    let mut adapted: Vec<Vec<Complex64>> = vc.basis.clone();
    for b in &h.basis {
        let mut trial = adapted.clone();
        trial.push(b.clone());
        let m = DMatrix::from_columns(&trial.iter().map(|x| realify(x)).collect::<Vec<_>>());
        if real_rank(&m) == trial.len() {
            adapted = trial;
        }
    }
    let r = adapted.len();
    let k = vc.dim();
    let mut samples: Vec<(Vec<Complex64>, bool)> = vec![];
    for code in 0..3usize.pow(r as u32) {
        let mut s = vec![c(0.0); ctx.n_modes()];
        let mut in_vc = true;
        let mut t = code;
        for (j, b) in adapted.iter().enumerate() {
            let coeff = (t % 3) as f64 - 1.0;
            t /= 3;
            if coeff != 0.0 && j >= k {
                in_vc = false;
            }
            for (x, y) in s.iter_mut().zip(b) {
                *x += y * (coeff * step);
            }
        }
        samples.push((s, in_vc));
    }
    let low = ctx.low_block();
    let restrict = |m: &CMatrix| -> DVector<Complex64> {
        let sub = m.select_rows(&low).select_columns(&low);
        DVector::from_iterator(sub.len(), sub.iter().copied())
    };
    let weyls: Vec<CMatrix> = samples.iter().map(|(s, _)| ctx.weyl(s)).collect::<Result<_>>()?;
    let vweyls: Vec<CMatrix> = v.basis.iter().map(|x| ctx.weyl(x)).collect::<Result<_>>()?;
    let block = low.len() * low.len();
    let rows = block * vweyls.len();
    let nsamp = weyls.len();
    // Real form of the complex constraint system so the solution space is counted over ℂ
    // through the real null space of [Re -Im; Im Re].
    let mut cons = DMatrix::<f64>::zeros((2 * rows).max(2 * nsamp), 2 * nsamp);
    for (s, w) in weyls.iter().enumerate() {
        for (j, wv) in vweyls.iter().enumerate() {
            let col = restrict(&(w * wv - wv * w));
            for (i, z) in col.iter().enumerate() {
                let row = j * block + i;
                cons[(row, s)] = z.re;
                cons[(row, nsamp + s)] = -z.im;
                cons[(rows + row, s)] = z.im;
                cons[(rows + row, nsamp + s)] = z.re;
            }
        }
    }
    let sv = cons.singular_values();
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let nonzero: Vec<f64> = sv.iter().copied().filter(|&x| x > 1e-8 * smax).collect();
    let constraint_condition = if nonzero.is_empty() {
        1.0
    } else {
        smax / nonzero.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    };
    let null = null_space(&cons, 1e-8);
    let restricted: Vec<DVector<Complex64>> = weyls.iter().map(&restrict).collect();
    let solutions: Vec<DVector<Complex64>> = (0..null.ncols())
        .map(|j| {
            let mut x = DVector::zeros(block);
            for (s, w) in restricted.iter().enumerate() {
                x += w * Complex64::new(null[(s, j)], null[(nsamp + s, j)]);
            }
            x
        })
        .collect();
    let (commutant_dim, _) = complex_rank(&solutions, 1e-8);
    let direct: Vec<DVector<Complex64>> = restricted
        .iter()
        .zip(&samples)
        .filter(|(_, (_, in_vc))| *in_vc)
        .map(|(w, _)| w.clone())
        .collect();
    let (complement_dim, sample_condition) = complex_rank(&direct, 1e-8);
    Ok(CommutantReport {
        cutoff: ctx.cutoff(),
        low_block_size: low.len(),
        samples: nsamp,
        commutant_dim,
        complement_dim,
        difference: commutant_dim as i64 - complement_dim as i64,
        constraint_condition,
        sample_condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, norm: f64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let v: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let s = norm / one_particle_norm(&v);
        v.into_iter().map(|z| z * s).collect()
    }

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn dimensions_and_ladder_ccr() {
        for (n, k) in [(1usize, 6usize), (2, 5), (3, 4)] {
            let ctx = FockContext::new(n, k).unwrap();
            assert_eq!(ctx.dim(), binomial(n + k, n));
            for i in 0..n {
                for j in 0..n {
                    let comm = ctx.lowering(i) * ctx.raising(j) - ctx.raising(j) * ctx.lowering(i);
                    for (s, occ) in ctx.states().iter().enumerate() {
                        if occ.iter().sum::<usize>() < k {
                            let expected = if i == j { 1.0 } else { 0.0 };
                            for r in 0..ctx.dim() {
                                let target = if r == s { expected } else { 0.0 };
                                assert!((comm[(r, s)] - c(target)).norm() < 1e-14);
                            }
                        }
                    }
                }
            }
        }
        assert!(FockContext::new(5, 4).is_err());
    }

    #[test]
    fn two_point_function_and_field_commutator() {
        let ctx = FockContext::new(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let f = random_vec(2, rng.gen_range(0.1..1.0), &mut rng);
            let g = random_vec(2, rng.gen_range(0.1..1.0), &mut rng);
            let pf = ctx.field_operator(&f).unwrap();
            let pg = ctx.field_operator(&g).unwrap();
            assert!((&pf - pf.adjoint()).norm() < 1e-12);
            let two = ctx.vacuum_expectation(&(&pf * &pg));
            assert!((two - one_particle_inner(&f, &g)).norm() < 1e-10);
            let comm = &pf * &pg - &pg * &pf;
            let expected = Complex64::new(0.0, 2.0 * one_particle_sigma(&f, &g));
            for (s, occ) in ctx.states().iter().enumerate() {
                if occ.iter().sum::<usize>() <= ctx.cutoff() - 2 {
                    for r in 0..ctx.dim() {
                        let target = if r == s { expected } else { c(0.0) };
                        assert!((comm[(r, s)] - target).norm() < 1e-10);
                    }
                }
            }
            let i_f: Vec<Complex64> = f.iter().map(|z| z * Complex64::new(0.0, 1.0)).collect();
            let pif = ctx.field_operator(&i_f).unwrap();
            let cc = ctx.vacuum_expectation(&(&pf * &pif - &pif * &pf));
            assert!((cc - Complex64::new(0.0, 2.0 * one_particle_norm(&f).powi(2))).norm() < 1e-10);
        }
        assert_eq!(ctx.field_operator(&[c(0.0), c(0.0)]).unwrap().norm(), 0.0);
    }

    #[test]
    fn weyl_operators() {
        let ctx = FockContext::new(1, 12).unwrap();
        let id = CMatrix::identity(ctx.dim(), ctx.dim());
        assert!((ctx.weyl(&[c(0.0)]).unwrap() - &id).norm() < 1e-14);
        let f = [Complex64::new(0.6, 0.8)];
        let w = ctx.weyl(&f).unwrap();
        assert!(((w.adjoint() * &w) - &id).norm() < 1e-10);
        let wm = ctx.weyl(&[-f[0]]).unwrap();
        assert!(ctx.low_block_norm(&(&w * wm - &id)) < 1e-8);
        let ve = ctx.vacuum_expectation(&w);
        assert!((ve - c((-0.5f64).exp())).norm() < 1e-6);
    }

    #[test]
    fn weyl_relation_improves_with_cutoff() {
        let f = [Complex64::new(0.3, 0.4)];
        let g = [Complex64::new(-0.2, 0.5)];
        let r8 = FockContext::new(1, 8).unwrap().weyl_relation_residual(&f, &g).unwrap();
        let r16 = FockContext::new(1, 16).unwrap().weyl_relation_residual(&f, &g).unwrap();
        assert!(r16 <= r8);
        let same = FockContext::new(1, 16).unwrap().weyl_relation_residual(&f, &f).unwrap();
        assert!(same < 1e-6);
        let ctx = FockContext::new(2, 10).unwrap();
        let a = [c(0.3), c(-0.2)];
        let b = [c(-0.1), c(0.4)];
        let rep = ctx.commutation_vs_symplectic(&a, &b).unwrap();
        assert_eq!(rep.sigma, 0.0);
        assert!(rep.measured_norm < 1e-6);
    }

    #[test]
    fn commutator_follows_the_phase_formula() {
        let ctx = FockContext::new(1, 14).unwrap();
        let s = (std::f64::consts::FRAC_PI_2).sqrt();
        let f = [c(s)];
        let g = [Complex64::new(0.0, s)];
        assert!((one_particle_sigma(&f, &g) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let rep = ctx.commutation_vs_symplectic(&f, &g).unwrap();
        assert!((rep.predicted_norm - 2.0).abs() < 1e-3, "{rep:?}");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4 {
            let f = random_vec(1, 0.6, &mut rng);
            let g = random_vec(1, 0.6, &mut rng);
            let rep = ctx.commutation_vs_symplectic(&f, &g).unwrap();
            assert!(rep.disagreement() < 1e-5, "{rep:?}");
        }
    }

    #[test]
    fn commutant_worked_cases() {
        let ctx = FockContext::new(1, 10).unwrap();
        let h = RealSubspace::full(1);
        let full = relative_commutant_dims(&ctx, &h, &h, 0.5).unwrap();
        assert_eq!((full.commutant_dim, full.complement_dim), (1, 1));
        let v = RealSubspace::new(1, vec![vec![c(1.0)]]).unwrap();
        let rep = relative_commutant_dims(&ctx, &v, &h, 0.5).unwrap();
        assert_eq!(rep.complement_dim, 3);
        assert_eq!(rep.difference, 0, "{rep:?}");
        let big = FockContext::new(3, 4).unwrap();
        assert!(matches!(
            relative_commutant_dims(&big, &RealSubspace::full(3), &RealSubspace::full(3), 0.5),
            Err(Error::Budget { .. })
        ));
        assert!(RealSubspace::new(1, vec![vec![c(1.0)], vec![c(2.0)]]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn field_operator_is_real_linear(seed in 0u64..10_000, t in -2.0f64..2.0) {
            let ctx = FockContext::new(2, 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_vec(2, 1.0, &mut rng);
            let g = random_vec(2, 1.0, &mut rng);
            let comb: Vec<Complex64> = f.iter().zip(&g).map(|(a, b)| a * t + b).collect();
            let lhs = ctx.field_operator(&comb).unwrap();
            let rhs = ctx.field_operator(&f).unwrap() * c(t) + ctx.field_operator(&g).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
