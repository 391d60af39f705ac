//! Finite-dimensional symplectic subspace algebra shared by the scalar and EM spaces.
//!
//! A [`SymplecticSpace`] is `ℝ^{2b}` split into a position block and a momentum block,
//! with a positive semidefinite energy Gram matrix `G` and the canonical form
//! `σ(x, y) = s (x₀·y₁ - x₁·y₀)`. Subspaces are stored as `G`-orthonormal bases together
//! with their images under a factor `L`, `G = LᵀL`, so that energy norms of differences
//! are Euclidean norms and do not lose digits on the null space of `G`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Gram–Schmidt drop tolerance relative to the generator norm.
    pub drop: f64,
    /// Singular-value threshold relative to the largest singular value.
    pub svd: f64,
    /// Largest projection residual accepted as containment.
    pub containment: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            drop: 1e-10,
            svd: 1e-10,
            containment: 1e-8,
        }
    }
}

/// Eigenvalues of a Gram block below this fraction of the largest count as rounding.
const GRAM_NULL_CUTOFF: f64 = 1e-11;

/// `Λ^{1/2} Uᵀ` from `G = U Λ Uᵀ`, rounding-level eigenvalues set to zero.
fn gram_factor(g: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut f = eig.eigenvectors.transpose();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        let s = if l > GRAM_NULL_CUTOFF * lmax { l.sqrt() } else { 0.0 };
        f.row_mut(i).scale_mut(s);
    }
    (f, lmax)
}

#[derive(Debug)]
pub struct SymplecticSpace {
    block: usize,
    gram: DMatrix<f64>,
    factor: DMatrix<f64>,
    lambda_max: f64,
    sigma_scale: f64,
    tol: Tolerances,
}

impl SymplecticSpace {
    pub fn new(
        gram0: DMatrix<f64>,
        gram1: DMatrix<f64>,
        sigma_scale: f64,
        tol: Tolerances,
    ) -> Result<Arc<Self>> {
        let b = gram0.nrows();
        if gram0.ncols() != b || gram1.nrows() != b || gram1.ncols() != b {
            return Err(Error::DimensionMismatch {
                expected: b,
                found: gram1.nrows(),
            });
        }
        let mut gram = DMatrix::zeros(2 * b, 2 * b);
        gram.view_mut((0, 0), (b, b)).copy_from(&gram0);
        gram.view_mut((b, b), (b, b)).copy_from(&gram1);
        let (f0, l0) = gram_factor(&gram0);
        let (f1, l1) = gram_factor(&gram1);
        let mut factor = DMatrix::zeros(2 * b, 2 * b);
        factor.view_mut((0, 0), (b, b)).copy_from(&f0);
        factor.view_mut((b, b), (b, b)).copy_from(&f1);
        Ok(Arc::new(Self {
            block: b,
            gram,
            factor,
            lambda_max: l0.max(l1),
            sigma_scale,
            tol,
        }))
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn dim(&self) -> usize {
        2 * self.block
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `L` with `LᵀL = G`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn energy(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(&self.gram * y))
    }

    pub fn sigma(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let b = self.block;
        self.sigma_scale * (x.rows(0, b).dot(&y.rows(b, b)) - x.rows(b, b).dot(&y.rows(0, b)))
    }

    /// Columns `J x` with `σ(x, y) = (J x)ᵀ y`.
    fn sigma_dual(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.block;
        let mut out = DMatrix::zeros(2 * b, x.ncols());
        out.rows_mut(0, b).copy_from(&(x.rows(b, b) * -self.sigma_scale));
        out.rows_mut(b, b).copy_from(&(x.rows(0, b) * self.sigma_scale));
        out
    }

    pub fn zero(self: &Arc<Self>) -> Subspace {
        Subspace {
            space: self.clone(),
            basis: DMatrix::zeros(self.dim(), 0),
            lbasis: DMatrix::zeros(self.dim(), 0),
            dropped: 0,
        }
    }

    /// Energy-orthonormal basis of the span of the generator columns: Gram–Schmidt with a
    /// second orthogonalization pass in factor coordinates. Generators of rounding-level
    /// energy, or whose remainder falls below the drop tolerance, are discarded and counted.
    pub fn span(self: &Arc<Self>, generators: &DMatrix<f64>) -> Result<Subspace> {
        if generators.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: generators.nrows(),
            });
        }
        let l = &self.factor * generators;
        let mut basis = DMatrix::<f64>::zeros(self.dim(), generators.ncols());
        let mut lbasis = DMatrix::<f64>::zeros(self.dim(), generators.ncols());
        let mut k = 0;
        let mut dropped = 0;
        for j in 0..generators.ncols() {
            let mut x = generators.column(j).into_owned();
            let mut lx = l.column(j).into_owned();
            let n0 = lx.norm();
            if n0 <= (GRAM_NULL_CUTOFF * self.lambda_max).sqrt() * x.norm() {
                dropped += 1;
                continue;
            }
            for _ in 0..2 {
                if k > 0 {
                    let q = basis.columns(0, k);
                    let lq = lbasis.columns(0, k);
                    let c = lq.tr_mul(&lx);
                    x.gemv(-1.0, &q, &c, 1.0);
                    lx.gemv(-1.0, &lq, &c, 1.0);
                }
            }
            let n = lx.norm();
            if n <= self.tol.drop * n0 {
                dropped += 1;
                continue;
            }
            basis.set_column(k, &(x / n));
            lbasis.set_column(k, &(lx / n));
            k += 1;
        }
        Ok(Subspace {
            space: self.clone(),
            basis: basis.columns(0, k).into_owned(),
            lbasis: lbasis.columns(0, k).into_owned(),
            dropped,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Subspace {
    space: Arc<SymplecticSpace>,
    basis: DMatrix<f64>,
    lbasis: DMatrix<f64>,
    dropped: usize,
}

impl Subspace {
    pub fn space(&self) -> &Arc<SymplecticSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Generators discarded as dependent when the span was built.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    fn same_space(&self, other: &Subspace) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) {
            Ok(())
        } else {
            Err(Error::AmbientMismatch)
        }
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.lbasis.tr_mul(&self.lbasis);
        let mut e: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                e = e.max((m[(i, j)] - target).abs());
            }
        }
        e
    }

    pub fn join(&self, other: &Subspace) -> Result<Subspace> {
        self.same_space(other)?;
        let mut gens = DMatrix::zeros(self.space.dim(), self.dim() + other.dim());
        gens.columns_mut(0, self.dim()).copy_from(&self.basis);
        gens.columns_mut(self.dim(), other.dim()).copy_from(&other.basis);
        self.space.span(&gens)
    }

    /// Energy projection of a vector onto the subspace.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let lx = self.space.factor() * x;
        &self.basis * self.lbasis.tr_mul(&lx)
    }

    /// `‖(I - P_self) P_other‖` in the energy norm.
    pub fn excess(&self, other: &Subspace) -> Result<f64> {
        self.same_space(other)?;
        if other.dim() == 0 {
            return Ok(0.0);
        }
        let c = self.lbasis.tr_mul(&other.lbasis);
        let r = &other.lbasis - &self.lbasis * &c;
        let smax = r
            .singular_values()
            .iter()
            .fold(0.0f64, |a, &b| a.max(b));
        Ok(smax.min(1.0))
    }

    pub fn require_within(&self, ambient: &Subspace) -> Result<()> {
        let residual = ambient.excess(self)?;
        if residual > self.space.tol.containment {
            return Err(Error::Containment { residual });
        }
        Ok(())
    }
}

/// `max(‖(I - P_W) P_V‖, ‖(I - P_V) P_W‖)`; zero iff the spans agree.
pub fn subspace_gap(v: &Subspace, w: &Subspace) -> Result<f64> {
    Ok(w.excess(v)?.max(v.excess(w)?))
}

/// `{f ∈ W : σ(f, g) = 0 for all g ∈ V}` from the null space of `[σ(w_i, v_j)]ᵀ`.
pub fn symplectic_complement(v: &Subspace, w: &Subspace) -> Result<Subspace> {
    v.require_within(w)?;
    let space = w.space.clone();
    let kw = w.dim();
    let kv = v.dim();
    if kw == 0 {
        return Ok(space.zero());
    }
    let c = space.sigma_dual(&w.basis).tr_mul(&v.basis);
    let ct = c.transpose();
    let rows = kv.max(kw);
    let mut padded = DMatrix::zeros(rows, kw);
    padded.rows_mut(0, kv).copy_from(&ct);
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let thr = space.tol.svd * smax;
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= thr)
        .collect();
    let mut y = DMatrix::zeros(kw, null.len());
    for (col, &i) in null.iter().enumerate() {
        y.set_column(col, &vt.row(i).transpose());
    }
    Ok(Subspace {
        space,
        basis: &w.basis * &y,
        lbasis: &w.lbasis * &y,
        dropped: 0,
    })
}

/// `W ∩ W^c`, the degenerate directions of `σ` restricted to `W`.
pub fn radical(w: &Subspace) -> Result<Subspace> {
    symplectic_complement(w, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(b: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(b, b, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(b, b) * 0.5
    }

    fn space(b: usize, seed: u64) -> Arc<SymplecticSpace> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g0 = random_spd(b, &mut rng);
        let g1 = random_spd(b, &mut rng);
        SymplecticSpace::new(g0, g1, 0.7, Tolerances::default()).unwrap()
    }

    fn coordinate_span(s: &Arc<SymplecticSpace>, sites: &[usize]) -> Subspace {
        let b = s.block();
        let mut g = DMatrix::zeros(2 * b, 2 * sites.len());
        for (k, &i) in sites.iter().enumerate() {
            g[(i, 2 * k)] = 1.0;
            g[(b + i, 2 * k + 1)] = 1.0;
        }
        s.span(&g).unwrap()
    }

    #[test]
    fn span_is_orthonormal_and_drops_dependent_generators() {
        let s = space(6, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut g = DMatrix::from_fn(12, 5, |_, _| rng.gen_range(-1.0..1.0));
        let dep = g.column(0) * 2.0 - g.column(3);
        g = g.insert_column(5, 0.0);
        g.set_column(5, &dep);
        let v = s.span(&g).unwrap();
        assert_eq!(v.dim(), 5);
        assert_eq!(v.dropped(), 1);
        assert!(v.orthonormality_error() < 1e-12);
    }

    #[test]
    fn full_space_complement_is_trivial_and_zero_complement_is_everything() {
        let s = space(5, 3);
        let full = s.span(&DMatrix::identity(10, 10)).unwrap();
        assert_eq!(symplectic_complement(&full, &full).unwrap().dim(), 0);
        let z = symplectic_complement(&s.zero(), &full).unwrap();
        assert_eq!(z.dim(), 10);
        assert!(subspace_gap(&z, &full).unwrap() < 1e-12);
    }

    #[test]
    fn coordinate_duality_is_exact() {
        let s = space(8, 4);
        let full = coordinate_span(&s, &(0..8).collect::<Vec<_>>());
        let b = coordinate_span(&s, &[1, 2, 5]);
        let c = coordinate_span(&s, &[0, 3, 4, 6, 7]);
        let bc = symplectic_complement(&b, &full).unwrap();
        assert!(subspace_gap(&bc, &c).unwrap() < 1e-10);
        let cc = symplectic_complement(&c, &full).unwrap();
        assert!(subspace_gap(&cc, &b).unwrap() < 1e-10);
    }

    #[test]
    fn gap_examples() {
        let s = space(3, 5);
        let e = |i: usize| {
            let mut m = DMatrix::zeros(6, 1);
            m[(i, 0)] = 1.0;
            m
        };
        let v = s.span(&e(0)).unwrap();
        assert!(subspace_gap(&v, &v).unwrap() < 1e-12);
        // Energy-orthogonal partner of e0 within span{e0, e1}.
        let both = s.span(&DMatrix::from_columns(&[e(0).column(0), e(1).column(0)])).unwrap();
        let w = Subspace {
            space: s.clone(),
            basis: both.basis.columns(1, 1).into_owned(),
            lbasis: both.lbasis.columns(1, 1).into_owned(),
            dropped: 0,
        };
        assert!((subspace_gap(&v, &w).unwrap() - 1.0).abs() < 1e-12);
        let other = SymplecticSpace::new(DMatrix::identity(3, 3), DMatrix::identity(3, 3), 1.0, Tolerances::default()).unwrap();
        assert_eq!(subspace_gap(&v, &other.zero()), Err(Error::AmbientMismatch));
    }

    #[test]
    fn complement_requires_containment() {
        let s = space(4, 6);
        let v = coordinate_span(&s, &[0, 1]);
        let w = coordinate_span(&s, &[2, 3]);
        assert!(matches!(symplectic_complement(&v, &w), Err(Error::Containment { .. })));
    }

    #[test]
    fn radical_of_a_lagrangian_is_itself() {
        let s = space(4, 7);
        let mut g = DMatrix::zeros(8, 4);
        for i in 0..4 {
            g[(i, i)] = 1.0;
        }
        let l = s.span(&g).unwrap();
        assert!(subspace_gap(&radical(&l).unwrap(), &l).unwrap() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn dimensions_add_up_and_double_complement_returns(seed in 0u64..1000, k in 1usize..9) {
            let s = space(5, seed);
            let full = s.span(&DMatrix::identity(10, 10)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let v = s.span(&DMatrix::from_fn(10, k, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
            let vc = symplectic_complement(&v, &full).unwrap();
            prop_assert_eq!(v.dim() + vc.dim(), 10);
            let vcc = symplectic_complement(&vc, &full).unwrap();
            prop_assert!(subspace_gap(&vcc, &v).unwrap() < 1e-8);
            prop_assert!(vc.orthonormality_error() < 1e-10);
        }

        #[test]
        fn gap_is_symmetric(seed in 0u64..1000) {
            let s = space(4, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = s.span(&DMatrix::from_fn(8, 3, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
            let b = s.span(&DMatrix::from_fn(8, 3, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
            prop_assert_eq!(subspace_gap(&a, &b).unwrap(), subspace_gap(&b, &a).unwrap());
        }
    }
}
