//! Fourier-multiplier operators on the periodic lattice: powers of the dispersion, the
//! `‖·‖_±` free-field norms, mollifiers and convolutions, multiplication-operator norm
//! estimates with their Schur and Hilbert–Schmidt splits, dilations, diffeomorphism
//! pullbacks and the fractional Sobolev double-sum identity.
//!
//! Massless convention: for `m = 0` every negative power of `ω` acts as the
//! pseudo-inverse, i.e. the `p = 0` mode is sent to zero. Public entry points that take a
//! user field reject a nonzero mean instead of silently dropping it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{dot, LatticeField};
use crate::grid::LatticeGrid;
use crate::quadrature::{integrate, sphere_area};

const ZERO_MODE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn both() -> [Sign; 2] {
        [Sign::Plus, Sign::Minus]
    }
}

/// `ω(p)^s` per momentum index, with the massless zero mode sent to 0 for `s < 0`.
pub fn omega_power_table(grid: &LatticeGrid, s: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            let w = grid.omega(k);
            if s == 0.0 {
                1.0
            } else if w == 0.0 {
                0.0
            } else {
                w.powf(s)
            }
        })
        .collect()
}

pub fn check_zero_mode(f: &LatticeField) -> Result<()> {
    let total: f64 = f.values().iter().map(|v| v.abs()).sum();
    let mean = f.mean();
    if f.sum().abs() > ZERO_MODE_TOL * total.max(f64::MIN_POSITIVE) {
        return Err(Error::ZeroModeViolation { mean });
    }
    Ok(())
}

/// Multiply by `ω(p)^s` in momentum space.
pub fn apply_omega_power(f: &LatticeField, s: f64) -> Result<LatticeField> {
    let grid = f.grid();
    if s == 0.0 {
        return Ok(f.clone());
    }
    if s < 0.0 && grid.is_massless() {
        check_zero_mode(f)?;
    }
    let table = omega_power_table(grid, s);
    LatticeField::new(grid, grid.apply_multiplier(f.values(), |k| table[k]))
}

/// `‖f‖_± = sqrt(∫ |f̂(p)|² ω(p)^{±1} dp)` with the unitary Fourier normalization, which
/// equals `‖ω^{±1/2} f‖` in the quadrature `L²` norm.
pub fn norm_pm(f: &LatticeField, sign: Sign) -> Result<f64> {
    let grid = f.grid();
    if sign == Sign::Minus && grid.is_massless() {
        check_zero_mode(f)?;
    }
    Ok(weighted_norm_sq(f, &omega_power_table(grid, sign.value())).sqrt())
}

/// `(a^d / N^d) Σ_k |F_k|² w_k`.
pub(crate) fn weighted_norm_sq(f: &LatticeField, weights: &[f64]) -> f64 {
    let grid = f.grid();
    let spec = grid.fft_real(f.values());
    let s: f64 = spec.iter().zip(weights).map(|(z, w)| z.norm_sqr() * w).sum();
    s * grid.cell_volume() / grid.len() as f64
}

/// Standard bump `exp(-1/(1-r²))` on `r < 1`.
pub fn bump_profile(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

/// Centered bump of the given radius, renormalized so that `a^d Σ ρ = 1`.
pub fn bump(grid: &LatticeGrid, radius: f64) -> Result<LatticeField> {
    if !(radius >= 2.0 * grid.spacing()) {
        return Err(Error::Unresolvable {
            radius,
            spacing: grid.spacing(),
        });
    }
    if radius >= grid.extent() / 2.0 {
        return Err(Error::Wraparound(format!(
            "bump radius {radius} exceeds half the box {}",
            grid.extent() / 2.0
        )));
    }
    let raw = LatticeField::from_fn(grid, |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        bump_profile(r / radius)
    });
    let total = raw.sum() * grid.cell_volume();
    Ok(raw.scaled(1.0 / total))
}

/// `ρ_n(x) = n^d ρ(n x)`, supported in `|x| < 1/n`.
pub fn mollifier(grid: &LatticeGrid, n: u32) -> Result<LatticeField> {
    if n == 0 {
        return Err(Error::InvalidParameter("mollifier index must be positive".into()));
    }
    bump(grid, 1.0 / n as f64)
}

/// Periodic convolution `f ∗ k = IFFT(F K) a^d`.
pub fn convolve(f: &LatticeField, k: &LatticeField) -> Result<LatticeField> {
    f.same_grid(k)?;
    let grid = f.grid();
    let mut a = grid.fft_real(f.values());
    let b = grid.fft_real(k.values());
    let w = grid.cell_volume();
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y * w;
    }
    LatticeField::new(grid, grid.ifft_real(a))
}

/// Direct convolution over the exact support of `k`; exact zeros stay exact.
pub fn convolve_direct(f: &LatticeField, k: &LatticeField) -> Result<LatticeField> {
    f.same_grid(k)?;
    let grid = f.grid();
    let w = grid.cell_volume();
    let taps: Vec<(Vec<i64>, f64)> = k
        .exact_support()
        .into_iter()
        .map(|i| (grid.signed_coords(i), k.values()[i] * w))
        .collect();
    let mut out = vec![0.0; grid.len()];
    for x in f.exact_support() {
        let fx = f.values()[x];
        for (step, kv) in &taps {
            out[grid.shifted(x, step)] += fx * kv;
        }
    }
    LatticeField::new(grid, out)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PowerIteration {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-10,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest singular value of a real linear map by power iteration on `AᵀA`.
pub fn power_norm(
    dim: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_adjoint: impl Fn(&[f64]) -> Vec<f64>,
    opts: PowerIteration,
) -> NormEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let mut last = 0.0;
    for it in 1..=opts.max_iter {
        let w = apply(&v);
        let est = dot(&w, &w).sqrt();
        if est == 0.0 {
            return NormEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        let mut u = apply_adjoint(&w);
        if normalize(&mut u) == 0.0 {
            return NormEstimate {
                value: est,
                iterations: it,
                converged: true,
            };
        }
        v = u;
        if it > 1 && (est - last).abs() <= opts.tol * est {
            return NormEstimate {
                value: est,
                iterations: it,
                converged: true,
            };
        }
        last = est;
    }
    NormEstimate {
        value: last,
        iterations: opts.max_iter,
        converged: false,
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Operator norm on `L²` of `ω^{±1/2} M_χ ω^{∓1/2}`.
pub fn mult_operator_norm_estimate(
    chi: &LatticeField,
    sign: Sign,
    opts: PowerIteration,
) -> NormEstimate {
    let grid = chi.grid().clone();
    let left = omega_power_table(&grid, 0.5 * sign.value());
    let right = omega_power_table(&grid, -0.5 * sign.value());
    let chi_v = chi.values().to_vec();
    let apply_with = |l: &[f64], r: &[f64], v: &[f64]| {
        let t = grid.apply_multiplier(v, |k| r[k]);
        let t: Vec<f64> = t.iter().zip(&chi_v).map(|(a, b)| a * b).collect();
        grid.apply_multiplier(&t, |k| l[k])
    };
    power_norm(
        grid.len(),
        |v| apply_with(&left, &right, v),
        |v| apply_with(&right, &left, v),
        opts,
    )
}

/// Momentum-space kernel `K(p, q) = (ω(p)^{±1/2} ω(q)^{∓1/2} - 1) χ̂(p - q)` of the
/// difference between the conjugated and bare multiplication operators, in the
/// orthonormal plane-wave basis.
struct DifferenceKernel {
    grid: LatticeGrid,
    chi_hat: Vec<Complex64>,
    half: Vec<f64>,
    sign: Sign,
}

impl DifferenceKernel {
    fn new(chi: &LatticeField, sign: Sign) -> Self {
        let grid = chi.grid().clone();
        let scale = 1.0 / grid.len() as f64;
        let chi_hat = grid
            .fft_real(chi.values())
            .into_iter()
            .map(|z| z * scale)
            .collect();
        let half = omega_power_table(&grid, 0.5);
        Self {
            grid,
            chi_hat,
            half,
            sign,
        }
    }

    fn diff_index(&self, p: &[usize], q: &[usize]) -> usize {
        let n = self.grid.sites_per_axis();
        p.iter().zip(q).fold(0, |acc, (&a, &b)| acc * n + (a + n - b) % n)
    }

    fn ratio(&self, p: usize, q: usize) -> f64 {
        let (hp, hq) = (self.half[p], self.half[q]);
        match self.sign {
            Sign::Plus => hp / hq,
            Sign::Minus => hq / hp,
        }
    }

    fn entry(&self, p: usize, q: usize, pm: &[usize], qm: &[usize]) -> Complex64 {
        (self.ratio(p, q) - 1.0) * self.chi_hat[self.diff_index(pm, qm)]
    }
}

/// Default byte budget for explicit momentum-space matrices.
pub const DEFAULT_MATRIX_BUDGET: usize = 256 << 20;

/// Hilbert–Schmidt norm of `(ω^{±1/2} M_χ ω^{∓1/2} - M_χ) P_{[0,1]}`, assembled as an
/// explicit matrix with all modes as rows and the infrared modes `ω ≤ 1` as columns.
pub fn infrared_hs_norm(chi: &LatticeField, sign: Sign, budget: usize) -> Result<f64> {
    let kern = DifferenceKernel::new(chi, sign);
    let grid = &kern.grid;
    let admissible = |k: usize| grid.omega(k) > 0.0;
    let rows: Vec<usize> = (0..grid.len()).filter(|&k| admissible(k)).collect();
    let cols: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&k| grid.omega(k) <= 1.0)
        .collect();
    let required = rows.len() * cols.len() * std::mem::size_of::<Complex64>();
    if required > budget {
        return Err(Error::Budget { required, budget });
    }
    let multi: Vec<Vec<usize>> = (0..grid.len()).map(|k| grid.multi_index(k)).collect();
    let mut mat = nalgebra::DMatrix::<Complex64>::zeros(rows.len(), cols.len());
    for (j, &q) in cols.iter().enumerate() {
        for (i, &p) in rows.iter().enumerate() {
            mat[(i, j)] = kern.entry(p, q, &multi[p], &multi[q]);
        }
    }
    Ok(mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SchurReport {
    pub sign: Sign,
    /// `sup_p Σ_q |K(p, q)|` over the ultraviolet block.
    pub row_sup: f64,
    /// `sup_q Σ_p |K(p, q)|` over the ultraviolet block.
    pub col_sup: f64,
    /// Geometric mean of the two Schur quantities.
    pub bound: f64,
    /// Power-iteration estimate of the block norm.
    pub block_norm: NormEstimate,
    pub dominated: bool,
}

/// Schur test for the ultraviolet block `P_{(1,∞)}(ω^{±1/2} M_χ ω^{∓1/2} - M_χ)P_{(1,∞)}`.
pub fn schur_bound_check(
    chi: &LatticeField,
    sign: Sign,
    opts: PowerIteration,
) -> SchurReport {
    let kern = DifferenceKernel::new(chi, sign);
    let grid = kern.grid.clone();
    let uv: Vec<usize> = (0..grid.len()).filter(|&k| grid.omega(k) > 1.0).collect();
    let multi: Vec<Vec<usize>> = uv.iter().map(|&k| grid.multi_index(k)).collect();
    let mut row_sum = vec![0.0; uv.len()];
    let mut col_sum = vec![0.0; uv.len()];
    for (i, &p) in uv.iter().enumerate() {
        for (j, &q) in uv.iter().enumerate() {
            let v = kern.entry(p, q, &multi[i], &multi[j]).norm();
            row_sum[i] += v;
            col_sum[j] += v;
        }
    }
    let row_sup = row_sum.iter().cloned().fold(0.0, f64::max);
    let col_sup = col_sum.iter().cloned().fold(0.0, f64::max);
    let bound = (row_sup * col_sup).sqrt();

    let mask: Vec<f64> = (0..grid.len())
        .map(|k| if grid.omega(k) > 1.0 { 1.0 } else { 0.0 })
        .collect();
    let left = omega_power_table(&grid, 0.5 * sign.value());
    let right = omega_power_table(&grid, -0.5 * sign.value());
    let chi_v = chi.values().to_vec();
    let block = |l: &[f64], r: &[f64], v: &[f64]| {
        let v = grid.apply_multiplier(v, |k| mask[k]);
        let conj = {
            let t = grid.apply_multiplier(&v, |k| r[k]);
            let t: Vec<f64> = t.iter().zip(&chi_v).map(|(a, b)| a * b).collect();
            grid.apply_multiplier(&t, |k| l[k])
        };
        let bare: Vec<f64> = v.iter().zip(&chi_v).map(|(a, b)| a * b).collect();
        let diff: Vec<f64> = conj.iter().zip(&bare).map(|(a, b)| a - b).collect();
        grid.apply_multiplier(&diff, |k| mask[k])
    };
    let block_norm = power_norm(
        grid.len(),
        |v| block(&left, &right, v),
        |v| block(&right, &left, v),
        opts,
    );
    SchurReport {
        sign,
        row_sup,
        col_sup,
        bound,
        block_norm,
        dominated: block_norm.value <= bound * (1.0 + 1e-12),
    }
}

/// Band-limited (trigonometric) interpolation of a lattice field at arbitrary points,
/// given in centered coordinates.
pub fn band_limited_eval(f: &LatticeField, points: &[Vec<f64>]) -> Vec<f64> {
    let grid = f.grid();
    let coeffs = fourier_coefficients(f);
    points
        .iter()
        .map(|y| eval_trig(grid, &coeffs, y).re)
        .collect()
}

fn fourier_coefficients(f: &LatticeField) -> Vec<Complex64> {
    let grid = f.grid();
    let scale = 1.0 / grid.len() as f64;
    grid.fft_real(f.values())
        .into_iter()
        .map(|z| z * scale)
        .collect()
}

fn axis_phases(grid: &LatticeGrid, y: f64) -> Vec<Complex64> {
    let dp = grid.momentum_step();
    (0..grid.sites_per_axis())
        .map(|i| Complex64::from_polar(1.0, grid.signed(i) as f64 * dp * y))
        .collect()
}

/// `Σ_k c_k e^{i p_k·y}` by successive contraction over axes.
fn eval_trig(grid: &LatticeGrid, coeffs: &[Complex64], y: &[f64]) -> Complex64 {
    let n = grid.sites_per_axis();
    let mut cur: Vec<Complex64> = coeffs.to_vec();
    for axis in (0..grid.dim()).rev() {
        let ph = axis_phases(grid, y[axis]);
        cur = cur
            .chunks(n)
            .map(|c| c.iter().zip(&ph).map(|(a, b)| a * b).sum())
            .collect();
    }
    cur[0]
}

/// Transpose of [`band_limited_eval`] with respect to the Euclidean pairing of site values.
fn band_limited_eval_adjoint(grid: &LatticeGrid, points: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let n = grid.sites_per_axis();
    let d = grid.dim();
    let mut h = vec![Complex64::default(); grid.len()];
    for (y, &gv) in points.iter().zip(g) {
        if gv == 0.0 {
            continue;
        }
        let phases: Vec<Vec<Complex64>> = (0..d).map(|j| axis_phases(grid, y[j])).collect();
        for (k, hk) in h.iter_mut().enumerate() {
            let mut z = Complex64::new(gv, 0.0);
            let mut rest = k;
            for j in (0..d).rev() {
                z *= phases[j][rest % n];
                rest /= n;
            }
            *hk += z;
        }
    }
    grid.fft(&mut h);
    let scale = 1.0 / grid.len() as f64;
    h.into_iter().map(|z| z.re * scale).collect()
}

/// Dilation `(f0, f1) ↦ (λ^{(d-1)/2} f0(λx), λ^{(d+1)/2} f1(λx))`, the Cauchy-data action
/// of the spacetime dilation, unitary for the massless one-particle norm.
pub fn dilation(
    f0: &LatticeField,
    f1: &LatticeField,
    lambda: f64,
) -> Result<(LatticeField, LatticeField)> {
    f0.same_grid(f1)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("dilation factor must be positive, got {lambda}")));
    }
    let grid = f0.grid();
    let half = grid.extent() / 2.0 - grid.spacing();
    for f in [f0, f1] {
        for s in f.support(1e-12) {
            let reach = grid
                .position(s)
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()))
                / lambda;
            if reach > half {
                return Err(Error::Wraparound(format!(
                    "dilated support reaches {reach:.4}, box half-width {half:.4}"
                )));
            }
        }
    }
    let d = grid.dim() as f64;
    let points: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| grid.position(i).iter().map(|x| lambda * x).collect())
        .collect();
    let c0 = lambda.powf((d - 1.0) / 2.0);
    let c1 = lambda.powf((d + 1.0) / 2.0);
    let g0 = band_limited_eval(f0, &points).into_iter().map(|v| c0 * v).collect();
    let g1 = band_limited_eval(f1, &points).into_iter().map(|v| c1 * v).collect();
    Ok((LatticeField::new(grid, g0)?, LatticeField::new(grid, g1)?))
}

/// Radial diffeomorphism `φ(x) = x (1 + s η(|x|/R))` with `η(ρ) = e·exp(-1/(1-ρ²))`,
/// equal to the identity outside the ball of radius `R`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiffeoSpec {
    pub radius: f64,
    pub strength: f64,
}

fn eta(rho: f64) -> f64 {
    if rho >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - rho * rho)).exp()
    }
}

fn eta_prime(rho: f64) -> f64 {
    if rho >= 1.0 {
        0.0
    } else {
        let q = 1.0 - rho * rho;
        -2.0 * rho / (q * q) * eta(rho)
    }
}

const PROFILE_SAMPLES: usize = 200_000;

fn profile_sup(f: impl Fn(f64) -> f64) -> f64 {
    (0..=PROFILE_SAMPLES)
        .map(|i| f(i as f64 / PROFILE_SAMPLES as f64).abs())
        .fold(0.0, f64::max)
}

impl DiffeoSpec {
    pub fn identity(radius: f64) -> Self {
        Self {
            radius,
            strength: 0.0,
        }
    }

    /// Member of the family whose `b_λ` equals the requested value.
    pub fn with_b(radius: f64, b: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&b) {
            return Err(Error::InvalidParameter(format!("b must lie in [0, 1), got {b}")));
        }
        let c = profile_sup(|r| eta(r).abs().max((eta(r) + r * eta_prime(r)).abs()));
        Ok(Self {
            radius,
            strength: b / c,
        })
    }

    pub fn map(&self, x: &[f64]) -> Vec<f64> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let k = 1.0 + self.strength * eta(r / self.radius);
        x.iter().map(|v| v * k).collect()
    }

    pub fn jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let d = x.len();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rho = r / self.radius;
        let iso = 1.0 + self.strength * eta(rho);
        let rad = if r > 0.0 {
            self.strength * eta_prime(rho) / (self.radius * r)
        } else {
            0.0
        };
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| if i == j { iso } else { 0.0 } + rad * x[i] * x[j])
                    .collect()
            })
            .collect()
    }

    /// `a_λ = sup |φ(x) - x|`.
    pub fn a_lambda(&self) -> f64 {
        self.strength.abs() * self.radius * profile_sup(|r| r * eta(r))
    }

    /// `b_λ = sup |Dφ(x) - 1|`; the Jacobian deviation has the tangential eigenvalue
    /// `sη` and the radial eigenvalue `s(η + ρη')`.
    pub fn b_lambda(&self) -> f64 {
        self.strength.abs() * profile_sup(|r| eta(r).abs().max((eta(r) + r * eta_prime(r)).abs()))
    }

    /// `(1 - b)^{-2d} (1 + b)^{d ± 1}`.
    pub fn norm_bound_sq(&self, d: usize, sign: Sign) -> f64 {
        let b = self.b_lambda();
        let d = d as f64;
        (1.0 - b).powf(-2.0 * d) * (1.0 + b).powf(d + sign.value())
    }

    fn moved_sites(&self, grid: &LatticeGrid) -> Vec<(usize, Vec<f64>)> {
        (0..grid.len())
            .filter_map(|i| {
                let x = grid.position(i);
                let y = self.map(&x);
                if y != x {
                    Some((i, y))
                } else {
                    None
                }
            })
            .collect()
    }

    fn check(&self, grid: &LatticeGrid) -> Result<()> {
        if self.b_lambda() >= 1.0 {
            return Err(Error::InvalidParameter("b_λ must be below 1".into()));
        }
        if self.radius >= grid.extent() / 2.0 {
            return Err(Error::Wraparound(
                "diffeomorphism support exceeds the fundamental domain".into(),
            ));
        }
        Ok(())
    }
}

/// Pullback `f ↦ f ∘ φ` on site values: identity on fixed sites, band-limited
/// interpolation on moved ones.
struct Pullback {
    grid: LatticeGrid,
    moved: Vec<(usize, Vec<f64>)>,
}

impl Pullback {
    fn new(grid: &LatticeGrid, spec: &DiffeoSpec) -> Result<Self> {
        spec.check(grid)?;
        Ok(Self {
            grid: grid.clone(),
            moved: spec.moved_sites(grid),
        })
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        if self.moved.is_empty() {
            return out;
        }
        let f = LatticeField::new(&self.grid, v.to_vec()).expect("length checked");
        let coeffs = fourier_coefficients(&f);
        for (i, y) in &self.moved {
            out[*i] = eval_trig(&self.grid, &coeffs, y).re;
        }
        out
    }

    fn apply_adjoint(&self, g: &[f64]) -> Vec<f64> {
        let mut fixed = g.to_vec();
        let mut pts = Vec::with_capacity(self.moved.len());
        let mut vals = Vec::with_capacity(self.moved.len());
        for (i, y) in &self.moved {
            fixed[*i] = 0.0;
            pts.push(y.clone());
            vals.push(g[*i]);
        }
        if pts.is_empty() {
            return fixed;
        }
        let back = band_limited_eval_adjoint(&self.grid, &pts, &vals);
        fixed.iter().zip(&back).map(|(a, b)| a + b).collect()
    }
}

pub fn diffeo_pullback(
    f0: &LatticeField,
    f1: &LatticeField,
    spec: &DiffeoSpec,
) -> Result<(LatticeField, LatticeField)> {
    f0.same_grid(f1)?;
    let pb = Pullback::new(f0.grid(), spec)?;
    Ok((
        LatticeField::new(f0.grid(), pb.apply(f0.values()))?,
        LatticeField::new(f1.grid(), pb.apply(f1.values()))?,
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiffeoNormReport {
    pub a_lambda: f64,
    pub b_lambda: f64,
    /// Squared norm of the pullback in `‖·‖_+` (first Cauchy component).
    pub measured_plus_sq: f64,
    pub bound_plus_sq: f64,
    /// Squared norm of the pullback in `‖·‖_-` (second Cauchy component).
    pub measured_minus_sq: f64,
    pub bound_minus_sq: f64,
    pub slack: f64,
    pub within_bound: bool,
}

/// Inputs and outputs of the diffeomorphism norm estimate are restricted to
/// `|p| ≤ DIFFEO_BAND_FRACTION · π/a`, where resampling of `f ∘ φ` does not alias.
pub const DIFFEO_BAND_FRACTION: f64 = 0.5;

/// Power-iteration norms of `P ω^{±1/2} D ω^{∓1/2} P` against `(1-b)^{-2d}(1+b)^{d±1}`,
/// with `P` the band projector above.
pub fn diffeo_norm_check(
    grid: &LatticeGrid,
    spec: &DiffeoSpec,
    slack: f64,
    opts: PowerIteration,
) -> Result<DiffeoNormReport> {
    let pb = Pullback::new(grid, spec)?;
    let cutoff = DIFFEO_BAND_FRACTION * PI / grid.spacing();
    let band: Vec<f64> = (0..grid.len())
        .map(|k| if grid.p2(k).sqrt() <= cutoff { 1.0 } else { 0.0 })
        .collect();
    let mut measured = [0.0; 2];
    for (slot, sign) in Sign::both().into_iter().enumerate() {
        let l: Vec<f64> = omega_power_table(grid, 0.5 * sign.value())
            .iter()
            .zip(&band)
            .map(|(w, c)| w * c)
            .collect();
        let r: Vec<f64> = omega_power_table(grid, -0.5 * sign.value())
            .iter()
            .zip(&band)
            .map(|(w, c)| w * c)
            .collect();
        let est = power_norm(
            grid.len(),
            |v| {
                let t = grid.apply_multiplier(v, |k| r[k]);
                grid.apply_multiplier(&pb.apply(&t), |k| l[k])
            },
            |v| {
                let t = grid.apply_multiplier(v, |k| l[k]);
                grid.apply_multiplier(&pb.apply_adjoint(&t), |k| r[k])
            },
            opts,
        );
        measured[slot] = est.value * est.value;
    }
    let bp = spec.norm_bound_sq(grid.dim(), Sign::Plus);
    let bm = spec.norm_bound_sq(grid.dim(), Sign::Minus);
    Ok(DiffeoNormReport {
        a_lambda: spec.a_lambda(),
        b_lambda: spec.b_lambda(),
        measured_plus_sq: measured[0],
        bound_plus_sq: bp,
        measured_minus_sq: measured[1],
        bound_minus_sq: bm,
        slack,
        within_bound: measured[0] <= bp * (1.0 + slack) && measured[1] <= bm * (1.0 + slack),
    })
}

/// `∫_0^∞ (1 - cos u) u^{-1-2s} du` by graded Gauss–Legendre over periods plus an
/// asymptotic tail.
fn radial_cosine_integral(s: f64) -> f64 {
    let period = 2.0 * PI;
    let q = 1.0 / (1.0 - s);
    let head = integrate(
        |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            let u = period * t.powf(q);
            (1.0 - u.cos()) * u.powf(-1.0 - 2.0 * s) * period * q * t.powf(q - 1.0)
        },
        0.0,
        1.0,
        64,
        24,
    );
    let periods = 4000usize;
    let body = integrate(
        |u: f64| (1.0 - u.cos()) * u.powf(-1.0 - 2.0 * s),
        period,
        period * periods as f64,
        (periods - 1) * 2,
        16,
    );
    let x = period * periods as f64;
    let alpha = 1.0 + 2.0 * s;
    let cos_tail = alpha * x.powf(-alpha - 1.0)
        - alpha * (alpha + 1.0) * (alpha + 2.0) * x.powf(-alpha - 3.0);
    let tail = x.powf(-2.0 * s) / (2.0 * s) - cos_tail;
    head + body + tail
}

/// `∫_{S^{d-1}} |ω_1|^{2s} dω`.
fn angular_moment(d: usize, s: f64) -> f64 {
    if d == 1 {
        return 2.0;
    }
    let r = 1.0 / (2.0 * s + 1.0);
    let half = integrate(
        |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            let phi = 0.5 * PI * t.powf(r);
            let jac = 0.5 * PI * r * t.powf(r - 1.0);
            phi.cos().powi(d as i32 - 2) * phi.sin().powf(2.0 * s) * jac
        },
        0.0,
        1.0,
        64,
        24,
    );
    2.0 * sphere_area(d - 2) * half
}

/// `A_s = ∫_{R^d} |e^{i z_1} - 1|² |z|^{-d-2s} dz`, the constant of the fractional identity
/// at `|p| = 1`.
pub fn fractional_constant(d: usize, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
    }
    Ok(angular_moment(d, s) * 2.0 * radial_cosine_integral(s))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct FractionalReport {
    pub lhs: f64,
    pub rhs: f64,
    pub a_s: f64,
}

impl FractionalReport {
    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 {
            1.0
        } else {
            self.lhs / self.rhs
        }
    }
}

/// Compare the torus double sum `a^{2d} Σ_{x≠y} |f(x) - f(y)|² / |x - y|^{d+2s}` with
/// `A_s ∫ |f̂(p)|² |p|^{2s} dp`. The double sum is evaluated exactly through the
/// autocorrelation `C(z) = Σ_y f(y + z) f(y)`.
pub fn fractional_identity(f: &LatticeField, s: f64) -> Result<FractionalReport> {
    let grid = f.grid();
    let a_s = fractional_constant(grid.dim(), s)?;
    let d = grid.dim() as f64;
    let spec = grid.fft_real(f.values());
    let power: Vec<Complex64> = spec.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
    let corr = grid.ifft_real(power);
    let norm_sq = dot(f.values(), f.values());
    let mut lhs = 0.0;
    for (z, c) in corr.iter().enumerate().skip(1) {
        let r = grid.radius(z);
        lhs += (2.0 * norm_sq - 2.0 * c) / r.powf(d + 2.0 * s);
    }
    lhs *= grid.cell_volume() * grid.cell_volume();
    let rhs_sum: f64 = spec
        .iter()
        .enumerate()
        .map(|(k, z)| z.norm_sqr() * grid.p2(k).powf(s))
        .sum();
    let rhs = a_s * rhs_sum * grid.cell_volume() / grid.len() as f64;
    Ok(FractionalReport { lhs, rhs, a_s })
}
