//! Periodic spatial lattice with momentum tables, dispersion and FFTs.
//!
//! Fourier conventions: the forward transform is the raw DFT `F_k = Σ_x f(x) e^{-i p_k·x}`,
//! the inverse carries `1/N^d`. Position-space inner products use the quadrature weight
//! `a^d`, so `a^d Σ_x f g = (a^d / N^d) Σ_k F_k conj(G_k)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Dispersion {
    /// `ω(p) = sqrt(|p|² + m²)` at the lattice momenta.
    #[default]
    Continuum,
    /// `ω(p) = sqrt(|κ(p)|² + m²)`, `|κ|² = Σ_j (2/a)² sin²(p_j a / 2)`.
    Lattice,
}

#[derive(Clone)]
pub struct LatticeGrid {
    d: usize,
    n: usize,
    a: f64,
    m: f64,
    dispersion: Dispersion,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for LatticeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeGrid")
            .field("d", &self.d)
            .field("n", &self.n)
            .field("a", &self.a)
            .field("m", &self.m)
            .field("dispersion", &self.dispersion)
            .finish()
    }
}

impl PartialEq for LatticeGrid {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.n == other.n
            && self.a == other.a
            && self.m == other.m
            && self.dispersion == other.dispersion
    }
}

impl LatticeGrid {
    pub fn new(d: usize, n: usize, a: f64, m: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "sites per axis must be a power of two >= 4, got {n}"
            )));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {a}")));
        }
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be non-negative, got {m}")));
        }
        if n.checked_pow(d as u32).is_none_or(|len| len > 1 << 28) {
            return Err(Error::InvalidParameter(format!("lattice {n}^{d} is too large")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            d,
            n,
            a,
            m,
            dispersion: Dispersion::Continuum,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn with_dispersion(mut self, dispersion: Dispersion) -> Self {
        self.dispersion = dispersion;
        self
    }

    pub fn with_mass(&self, m: f64) -> Result<Self> {
        let mut g = Self::new(self.d, self.n, self.a, m)?;
        g.dispersion = self.dispersion;
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sites_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.a
    }

    pub fn mass(&self) -> f64 {
        self.m
    }

    pub fn is_massless(&self) -> bool {
        self.m == 0.0
    }

    pub fn dispersion(&self) -> Dispersion {
        self.dispersion
    }

    /// Number of sites, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Box length `L = N a`.
    pub fn extent(&self) -> f64 {
        self.n as f64 * self.a
    }

    /// Quadrature weight `a^d`.
    pub fn cell_volume(&self) -> f64 {
        self.a.powi(self.d as i32)
    }

    pub fn momentum_step(&self) -> f64 {
        2.0 * PI / self.extent()
    }

    /// Signed integer coordinate in `{-N/2, …, N/2 - 1}`.
    pub fn signed(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn wrap(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        for j in (0..self.d).rev() {
            out[j] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Index of the site at signed integer coordinates (wrapped onto the torus).
    pub fn index_signed(&self, coords: &[i64]) -> usize {
        coords.iter().fold(0, |acc, &k| acc * self.n + self.wrap(k))
    }

    pub fn signed_coords(&self, idx: usize) -> Vec<i64> {
        self.multi_index(idx).into_iter().map(|i| self.signed(i)).collect()
    }

    /// Centered position `x_j = signed(i_j) a`.
    pub fn position(&self, idx: usize) -> Vec<f64> {
        self.signed_coords(idx)
            .into_iter()
            .map(|k| k as f64 * self.a)
            .collect()
    }

    pub fn radius(&self, idx: usize) -> f64 {
        self.position(idx).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn momentum(&self, idx: usize) -> Vec<f64> {
        let dp = self.momentum_step();
        self.signed_coords(idx)
            .into_iter()
            .map(|k| k as f64 * dp)
            .collect()
    }

    pub fn p2(&self, idx: usize) -> f64 {
        self.momentum(idx).iter().map(|p| p * p).sum()
    }

    pub fn kappa2(&self, idx: usize) -> f64 {
        let a = self.a;
        self.momentum(idx)
            .iter()
            .map(|p| {
                let s = 2.0 / a * (0.5 * p * a).sin();
                s * s
            })
            .sum()
    }

    pub fn omega(&self, idx: usize) -> f64 {
        let k2 = match self.dispersion {
            Dispersion::Continuum => self.p2(idx),
            Dispersion::Lattice => self.kappa2(idx),
        };
        (k2 + self.m * self.m).sqrt()
    }

    pub fn omega_table(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.omega(k)).collect()
    }

    /// Minimal-image displacement from site `from` to site `to`, in lattice units.
    pub fn offset(&self, from: usize, to: usize) -> Vec<i64> {
        let a = self.multi_index(from);
        let b = self.multi_index(to);
        a.iter()
            .zip(&b)
            .map(|(&i, &j)| self.signed(self.wrap(j as i64 - i as i64)))
            .collect()
    }

    pub fn distance(&self, from: usize, to: usize) -> f64 {
        let s: i64 = self.offset(from, to).iter().map(|k| k * k).sum();
        (s as f64).sqrt() * self.a
    }

    /// Site reached from `idx` by an integer step.
    pub fn shifted(&self, idx: usize, step: &[i64]) -> usize {
        let mut mi = self.multi_index(idx);
        for (i, s) in mi.iter_mut().zip(step) {
            *i = self.wrap(*i as i64 + s);
        }
        self.index_of(&mi)
    }

    /// In-place forward d-dimensional DFT.
    pub fn fft(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.fwd);
    }

    /// In-place inverse DFT including the `1/N^d` normalization.
    pub fn ifft(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inv);
        let s = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(buf.len(), self.len(), "buffer length must be N^d");
        let n = self.n;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.d.saturating_sub(1) {
            let stride = n.pow((self.d - 1 - axis) as u32);
            let block = stride * n;
            for start in (0..buf.len()).step_by(block) {
                for off in 0..stride {
                    let base = start + off;
                    for (i, z) in line.iter_mut().enumerate() {
                        *z = buf[base + i * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, z) in line.iter().enumerate() {
                        buf[base + i * stride] = *z;
                    }
                }
            }
        }
    }

    pub fn fft_real(&self, f: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft(&mut buf);
        buf
    }

    /// Inverse transform keeping the real part.
    pub fn ifft_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.ifft(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Apply a real Fourier multiplier given per momentum index.
    pub fn apply_multiplier(&self, f: &[f64], mult: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut buf = self.fft_real(f);
        for (k, z) in buf.iter_mut().enumerate() {
            *z *= mult(k);
        }
        self.ifft_real(buf)
    }

    /// Apply a complex Fourier multiplier; the caller is responsible for Hermitian symmetry.
    pub fn apply_complex_multiplier(
        &self,
        f: &[f64],
        mult: impl Fn(usize) -> Complex64,
    ) -> Vec<f64> {
        let mut buf = self.fft_real(f);
        for (k, z) in buf.iter_mut().enumerate() {
            *z *= mult(k);
        }
        self.ifft_real(buf)
    }

    /// Index of the momentum `-p`.
    pub fn negate_index(&self, idx: usize) -> usize {
        let mi: Vec<usize> = self
            .multi_index(idx)
            .into_iter()
            .map(|i| (self.n - i) % self.n)
            .collect();
        self.index_of(&mi)
    }

    /// Sites whose Chebyshev distance to the origin is at most `r` lattice units.
    pub fn chebyshev_ball(&self, r: i64) -> Vec<Vec<i64>> {
        let side = (2 * r + 1) as usize;
        let total = side.pow(self.d as u32);
        (0..total)
            .map(|mut t| {
                let mut v = vec![0i64; self.d];
                for j in (0..self.d).rev() {
                    v[j] = (t % side) as i64 - r;
                    t /= side;
                }
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(LatticeGrid::new(2, 6, 1.0, 0.0).is_err());
        assert!(LatticeGrid::new(2, 2, 1.0, 0.0).is_err());
        assert!(LatticeGrid::new(0, 8, 1.0, 0.0).is_err());
        assert!(LatticeGrid::new(2, 8, -1.0, 0.0).is_err());
        assert!(LatticeGrid::new(2, 8, 1.0, -0.5).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = LatticeGrid::new(3, 8, 0.5, 1.0).unwrap();
        for idx in [0, 1, 7, 8, 63, 64, 511] {
            assert_eq!(g.index_of(&g.multi_index(idx)), idx);
            assert_eq!(g.index_signed(&g.signed_coords(idx)), idx);
        }
        assert_eq!(g.signed(4), -4);
        assert_eq!(g.signed(3), 3);
    }

    #[test]
    fn fft_matches_direct_dft_2d() {
        let g = LatticeGrid::new(2, 4, 1.0, 0.0).unwrap();
        let f: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
        let fast = g.fft_real(&f);
        for k in 0..16 {
            let kk = g.multi_index(k);
            let mut acc = Complex64::default();
            for (x, &fx) in f.iter().enumerate() {
                let xx = g.multi_index(x);
                let phase = -2.0 * PI * (kk[0] * xx[0] + kk[1] * xx[1]) as f64 / 4.0;
                acc += fx * Complex64::from_polar(1.0, phase);
            }
            assert!((acc - fast[k]).norm() < 1e-12);
        }
        let back = g.ifft_real(fast);
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn real_fields_have_hermitian_spectra() {
        let g = LatticeGrid::new(3, 8, 0.3, 0.0).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| ((i as f64) * 0.37).sin()).collect();
        let ff = g.fft_real(&f);
        for k in 0..g.len() {
            assert!((ff[k] - ff[g.negate_index(k)].conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn lattice_dispersion_approaches_continuum_at_small_momentum() {
        let g = LatticeGrid::new(1, 64, 0.1, 0.0).unwrap();
        let gl = g.clone().with_dispersion(Dispersion::Lattice);
        let k = 1;
        assert!((g.omega(k) - gl.omega(k)).abs() / g.omega(k) < 1e-3);
        assert_eq!(gl.omega(0), 0.0);
    }

    #[test]
    fn torus_distance_uses_minimal_image() {
        let g = LatticeGrid::new(2, 8, 1.0, 0.0).unwrap();
        let a = g.index_signed(&[3, 0]);
        let b = g.index_signed(&[-3, 0]);
        assert!((g.distance(a, b) - 2.0).abs() < 1e-15);
    }
}
