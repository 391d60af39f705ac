//! Lattice Klein–Gordon commutator function, Cauchy-data propagation and causal-support
//! diagnostics.
//!
//! Space is the periodic lattice, time is continuous. The commutator function is the mode
//! sum
//!
//! `Δ(t, x) = (1/(N a)^d) Σ_k sin(ω_k t)/ω_k e^{i p_k·x}`,
//!
//! normalized so that `Δ(0, ·) = 0` and `∂_t Δ(0, ·)` is the lattice delta `δ_0 / a^d`.
//! A massless zero mode contributes its limit `sin(ω t)/ω → t`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::cauchy::CauchyDatum;
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::LatticeGrid;
use crate::spectral::{bump, convolve};

/// `sin(ω t)/ω` with the `ω → 0` limit.
pub fn sine_mode(omega: f64, t: f64) -> f64 {
    if omega == 0.0 {
        t
    } else {
        (omega * t).sin() / omega
    }
}

#[derive(Debug)]
pub struct PropagatorKernel {
    grid: LatticeGrid,
    omega: Vec<f64>,
    cache: RwLock<HashMap<u64, Arc<LatticeField>>>,
}

impl PropagatorKernel {
    pub fn new(grid: &LatticeGrid) -> Self {
        Self {
            grid: grid.clone(),
            omega: grid.omega_table(),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    /// Wraparound guard `L/2`.
    pub fn horizon(&self) -> f64 {
        self.grid.extent() / 2.0
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t.abs() >= self.horizon() {
            return Err(Error::HorizonExceeded {
                t,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }

    fn mode_slice(&self, mult: impl Fn(f64) -> f64) -> LatticeField {
        let n = self.grid.len();
        let scale = 1.0 / self.grid.cell_volume();
        let mut buf: Vec<num_complex::Complex64> = self
            .omega
            .iter()
            .map(|&w| num_complex::Complex64::new(mult(w) * scale, 0.0))
            .collect();
        debug_assert_eq!(buf.len(), n);
        self.grid.ifft(&mut buf);
        LatticeField::new(&self.grid, buf.into_iter().map(|z| z.re).collect())
            .expect("length matches grid")
    }

    /// `Δ(t, ·)`, cached per time.
    pub fn slice(&self, t: f64) -> Result<Arc<LatticeField>> {
        self.check_time(t)?;
        let key = t.to_bits();
        if let Some(s) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(self.mode_slice(|w| sine_mode(w, t)));
        self.cache
            .write()
            .expect("cache lock")
            .insert(key, s.clone());
        Ok(s)
    }

    /// `∂_t Δ(t, ·)`, the mode sum of `cos(ω t)`.
    pub fn time_derivative(&self, t: f64) -> Result<LatticeField> {
        self.check_time(t)?;
        Ok(self.mode_slice(|w| (w * t).cos()))
    }

    /// `∂_t² Δ(t, ·)`, the mode sum of `-ω sin(ω t)`.
    pub fn second_time_derivative(&self, t: f64) -> Result<LatticeField> {
        self.check_time(t)?;
        Ok(self.mode_slice(|w| -w * (w * t).sin()))
    }

    /// `ω² Δ(t, ·)`; together with the second derivative this closes the mode equation.
    pub fn omega_squared_slice(&self, t: f64) -> Result<LatticeField> {
        self.check_time(t)?;
        Ok(self.mode_slice(|w| w * w * sine_mode(w, t)))
    }

    pub fn commutator_function(&self, t: f64, site: usize) -> Result<f64> {
        if site >= self.grid.len() {
            return Err(Error::InvalidParameter(format!("site {site} out of range")));
        }
        Ok(self.slice(t)?.values()[site])
    }

    /// `(Δ(t) ∗ g)`: the solution with zero data and velocity `g` at time 0, at time `t`.
    pub fn evolve_velocity(&self, g: &LatticeField, t: f64) -> Result<LatticeField> {
        self.check_time(t)?;
        let spec = self.grid.fft_real(g.values());
        let buf = spec
            .into_iter()
            .zip(&self.omega)
            .map(|(z, &w)| z * sine_mode(w, t))
            .collect();
        LatticeField::new(&self.grid, self.grid.ifft_real(buf))
    }
}

/// A test function concentrated on finitely many time slices: `Σ_j w_j δ(t - t_j) g_j(x)`.
#[derive(Clone, Debug)]
pub struct SpacetimeSource {
    slices: Vec<SourceSlice>,
}

#[derive(Clone, Debug)]
pub struct SourceSlice {
    pub time: f64,
    pub weight: f64,
    pub field: LatticeField,
}

impl SpacetimeSource {
    pub fn new(slices: Vec<SourceSlice>) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::InvalidParameter("source needs at least one slice".into()));
        }
        for w in slices.windows(2) {
            w[0].field.same_grid(&w[1].field)?;
            if !(w[1].time > w[0].time) {
                return Err(Error::InvalidParameter(
                    "slice times must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { slices })
    }

    pub fn single(time: f64, field: LatticeField) -> Self {
        Self {
            slices: vec![SourceSlice {
                time,
                weight: 1.0,
                field,
            }],
        }
    }

    pub fn slices(&self) -> &[SourceSlice] {
        &self.slices
    }

    pub fn grid(&self) -> &LatticeGrid {
        self.slices[0].field.grid()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            slices: self
                .slices
                .iter()
                .map(|sl| SourceSlice {
                    time: sl.time,
                    weight: sl.weight * s,
                    field: sl.field.clone(),
                })
                .collect(),
        }
    }

    /// Time reversal `t ↦ -t` of the source.
    pub fn time_reversed(&self) -> Self {
        let mut slices: Vec<SourceSlice> = self
            .slices
            .iter()
            .map(|sl| SourceSlice {
                time: -sl.time,
                weight: sl.weight,
                field: sl.field.clone(),
            })
            .collect();
        slices.reverse();
        Self { slices }
    }
}

fn check_kernel(src: &SpacetimeSource, kernel: &PropagatorKernel) -> Result<()> {
    if src.grid() != kernel.grid() {
        return Err(Error::GridMismatch);
    }
    for s in src.slices() {
        kernel.check_time(s.time)?;
    }
    Ok(())
}

/// Cauchy data `(ρ0 Ef, ρ1 Ef)` of `u = Ef` on the `t = 0` surface, computed per mode:
/// `f̂0 = Σ_j w_j sin(-ω t_j)/ω ĝ_j`, `f̂1 = Σ_j w_j cos(ω t_j) ĝ_j`.
pub fn propagate_to_cauchy_data(
    src: &SpacetimeSource,
    kernel: &PropagatorKernel,
) -> Result<CauchyDatum> {
    check_kernel(src, kernel)?;
    let grid = kernel.grid();
    let n = grid.len();
    let mut h0 = vec![num_complex::Complex64::default(); n];
    let mut h1 = vec![num_complex::Complex64::default(); n];
    for s in src.slices() {
        let spec = grid.fft_real(s.field.values());
        for k in 0..n {
            let w = kernel.omega[k];
            h0[k] += spec[k] * (s.weight * sine_mode(w, -s.time));
            h1[k] += spec[k] * (s.weight * (w * s.time).cos());
        }
    }
    CauchyDatum::new(
        LatticeField::new(grid, grid.ifft_real(h0))?,
        LatticeField::new(grid, grid.ifft_real(h1))?,
    )
}

/// `(Ef)(t) = Σ_j w_j Δ(t - t_j) ∗ g_j`.
pub fn solution_at(src: &SpacetimeSource, kernel: &PropagatorKernel, t: f64) -> Result<LatticeField> {
    causal_sum(src, kernel, t, |_| true, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalDirection {
    Retarded,
    Advanced,
}

/// `E₊f(t) = Σ_j θ(t - t_j) w_j Δ(t - t_j) ∗ g_j` and `E₋f(t) = -Σ_j θ(t_j - t) w_j Δ(t - t_j) ∗ g_j`,
/// so that `E = E₊ - E₋`.
pub fn causal_field(
    src: &SpacetimeSource,
    kernel: &PropagatorKernel,
    t: f64,
    dir: CausalDirection,
) -> Result<LatticeField> {
    match dir {
        CausalDirection::Retarded => causal_sum(src, kernel, t, |tj| t >= tj, 1.0),
        CausalDirection::Advanced => causal_sum(src, kernel, t, |tj| t < tj, -1.0),
    }
}

fn causal_sum(
    src: &SpacetimeSource,
    kernel: &PropagatorKernel,
    t: f64,
    keep: impl Fn(f64) -> bool,
    sign: f64,
) -> Result<LatticeField> {
    check_kernel(src, kernel)?;
    let grid = kernel.grid();
    let mut acc = LatticeField::zeros(grid);
    for s in src.slices() {
        if keep(s.time) {
            let u = kernel.evolve_velocity(&s.field, t - s.time)?;
            acc = acc.add(&u.scaled(sign * s.weight))?;
        }
    }
    Ok(acc)
}

/// Spacetime pairing `⟨f, E g⟩ = Σ_{ij} v_i w_j ⟨f_i, Δ(t_i - s_j) ∗ g_j⟩`.
pub fn pairing(f: &SpacetimeSource, g: &SpacetimeSource, kernel: &PropagatorKernel) -> Result<f64> {
    check_kernel(f, kernel)?;
    let mut acc = 0.0;
    for fi in f.slices() {
        let eg = solution_at(g, kernel, fi.time)?;
        acc += fi.weight * fi.field.inner(&eg)?;
    }
    Ok(acc)
}

/// Independent oracle: velocity-Verlet integration of `ü = -ω² u` per slice, from
/// `(u, u̇) = (0, w_j g_j)` at `t_j` back to `t = 0`, with step at most `dt`.
pub fn leapfrog_cauchy_data(
    src: &SpacetimeSource,
    kernel: &PropagatorKernel,
    dt: f64,
) -> Result<CauchyDatum> {
    check_kernel(src, kernel)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("time step must be positive".into()));
    }
    let grid = kernel.grid();
    let w2: Vec<f64> = kernel.omega.iter().map(|w| w * w).collect();
    let accel = |u: &[f64]| -> Vec<f64> { grid.apply_multiplier(u, |k| -w2[k]) };
    let mut out = CauchyDatum::zeros(grid);
    for s in src.slices() {
        let mut u = vec![0.0; grid.len()];
        let mut v: Vec<f64> = s.field.values().iter().map(|x| x * s.weight).collect();
        let steps = (s.time.abs() / dt).ceil() as usize;
        if steps > 0 {
            let h = -s.time / steps as f64;
            let mut a = accel(&u);
            for _ in 0..steps {
                for i in 0..u.len() {
                    v[i] += 0.5 * h * a[i];
                    u[i] += h * v[i];
                }
                a = accel(&u);
                for i in 0..u.len() {
                    v[i] += 0.5 * h * a[i];
                }
            }
        }
        out = out.add(&CauchyDatum::new(
            LatticeField::new(grid, u)?,
            LatticeField::new(grid, v)?,
        )?)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HuygensReport {
    pub time: f64,
    pub shell_width: f64,
    pub smoothing_radius: f64,
    pub interior_sites: usize,
    pub interior_max: f64,
    pub peak: f64,
    pub ratio: f64,
}

/// Interior suppression of the commutator function at time `t`: the kernel is smeared
/// with the normalized bump of radius `w` (the shell width), which confines the continuum
/// massless signal to `t - w ≤ |x| ≤ t + w`, and `interior_max` is taken over `|x| < t - w`.
pub fn huygens_check(kernel: &PropagatorKernel, t: f64, shell_sites: f64) -> Result<HuygensReport> {
    let grid = kernel.grid();
    if !grid.is_massless() {
        return Err(Error::Precondition("Huygens check needs m = 0".into()));
    }
    if grid.dim() % 2 == 0 {
        return Err(Error::Precondition("Huygens check needs odd space dimension".into()));
    }
    huygens_ratio(kernel, t, shell_sites)
}

/// Same measurement without the massless/odd-dimension precondition, for controls.
pub fn huygens_ratio(kernel: &PropagatorKernel, t: f64, shell_sites: f64) -> Result<HuygensReport> {
    let grid = kernel.grid();
    kernel.check_time(t)?;
    let w = shell_sites * grid.spacing();
    if t <= w {
        return Err(Error::Precondition(format!("time {t} leaves no interior at shell width {w}")));
    }
    let rho = bump(grid, w)?;
    let smeared = convolve(kernel.slice(t)?.as_ref(), &rho)?;
    let mut interior_max: f64 = 0.0;
    let mut interior_sites = 0;
    for i in 0..grid.len() {
        if grid.radius(i) < t - w {
            interior_sites += 1;
            interior_max = interior_max.max(smeared.values()[i].abs());
        }
    }
    let peak = smeared.max_abs();
    Ok(HuygensReport {
        time: t,
        shell_width: w,
        smoothing_radius: w,
        interior_sites,
        interior_max,
        peak,
        ratio: interior_max / peak,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SupportReport {
    pub direction: CausalDirection,
    pub time: f64,
    pub shell_width: f64,
    pub outside_sites: usize,
    pub outside_max: f64,
    pub peak: f64,
    pub fraction: f64,
}

/// Largest `|E_± f(t)|` outside `J₊(supp f)` inflated by the shell width, relative to the
/// peak of the same field.
pub fn support_fraction(
    src: &SpacetimeSource,
    kernel: &PropagatorKernel,
    t: f64,
    shell_sites: f64,
    dir: CausalDirection,
) -> Result<SupportReport> {
    let grid = kernel.grid();
    let w = shell_sites * grid.spacing();
    let field = causal_field(src, kernel, t, dir)?;
    let supports: Vec<(f64, Vec<usize>)> = src
        .slices()
        .iter()
        .map(|s| (s.time, s.field.exact_support()))
        .collect();
    let inside_shadow = |x: usize| {
        supports.iter().any(|(tj, sites)| {
            let reach = t - tj + w;
            reach >= 0.0 && sites.iter().any(|&y| grid.distance(x, y) <= reach)
        })
    };
    let mut outside_max: f64 = 0.0;
    let mut outside_sites = 0;
    for x in 0..grid.len() {
        if !inside_shadow(x) {
            outside_sites += 1;
            outside_max = outside_max.max(field.values()[x].abs());
        }
    }
    let peak = field.max_abs();
    Ok(SupportReport {
        direction: dir,
        time: t,
        shell_width: w,
        outside_sites,
        outside_max,
        peak,
        fraction: if peak > 0.0 { outside_max / peak } else { 0.0 },
    })
}

/// Retarded-support diagnostic for a compact single-slice source.
pub fn retarded_support_check(
    src: &SpacetimeSource,
    kernel: &PropagatorKernel,
    t: f64,
    shell_sites: f64,
) -> Result<SupportReport> {
    if src.slices().len() != 1 {
        return Err(Error::Precondition("retarded support check takes a single slice".into()));
    }
    support_fraction(src, kernel, t, shell_sites, CausalDirection::Retarded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::bump_profile;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth(grid: &LatticeGrid, center: &[f64], r: f64) -> LatticeField {
        LatticeField::from_fn(grid, |x| {
            let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            bump_profile(d2.sqrt() / r)
        })
    }

    #[test]
    fn slice_vanishes_at_zero_and_velocity_is_lattice_delta() {
        for d in 1..=3 {
            for m in [0.0, 1.0] {
                let g = LatticeGrid::new(d, 16, 0.3, m).unwrap();
                let k = PropagatorKernel::new(&g);
                assert!(k.slice(0.0).unwrap().max_abs() == 0.0);
                let dt = k.time_derivative(0.0).unwrap();
                let delta = LatticeField::delta(&g, 0);
                assert!(dt.sub(&delta).unwrap().max_abs() < 1e-10 * delta.max_abs());
            }
        }
    }

    #[test]
    fn kernel_is_odd_in_time_and_even_in_space() {
        let g = LatticeGrid::new(2, 16, 0.5, 0.3).unwrap();
        let k = PropagatorKernel::new(&g);
        let p = k.slice(1.3).unwrap();
        let m = k.slice(-1.3).unwrap();
        assert!(p.add(&m).unwrap().max_abs() < 1e-14);
        assert!(p.sub(&p.reflected()).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn mode_equation_closes() {
        let g = LatticeGrid::new(2, 16, 0.5, 0.0).unwrap();
        let k = PropagatorKernel::new(&g);
        for t in [0.4, 1.7, -2.2] {
            let lhs = k
                .second_time_derivative(t)
                .unwrap()
                .add(&k.omega_squared_slice(t).unwrap())
                .unwrap();
            assert!(lhs.max_abs() < 1e-12);
        }
    }

    #[test]
    fn horizon_is_enforced() {
        let g = LatticeGrid::new(1, 8, 1.0, 0.0).unwrap();
        let k = PropagatorKernel::new(&g);
        assert!(matches!(k.slice(4.0), Err(Error::HorizonExceeded { .. })));
        assert!(k.slice(3.9).is_ok());
    }

    #[test]
    fn massive_field_has_a_converging_timelike_tail() {
        // Fixed physical box L = 16, t = 2, smeared value at the origin.
        let mut vals = vec![];
        for n in [32, 64, 128] {
            let g = LatticeGrid::new(3, n, 16.0 / n as f64, 1.0).unwrap();
            let k = PropagatorKernel::new(&g);
            let rho = bump(&g, 1.0).unwrap();
            let s = convolve(k.slice(2.0).unwrap().as_ref(), &rho).unwrap();
            vals.push(s.values()[0]);
        }
        assert!(vals[2].abs() > 1e-3);
        assert!((vals[1] - vals[2]).abs() < 0.5 * (vals[0] - vals[1]).abs(), "{vals:?}");
    }

    #[test]
    fn single_slice_at_zero_gives_velocity_data() {
        let g = LatticeGrid::new(2, 16, 0.5, 0.0).unwrap();
        let k = PropagatorKernel::new(&g);
        let f = smooth(&g, &[0.0, 0.0], 2.0);
        let data = propagate_to_cauchy_data(&SpacetimeSource::single(0.0, f.clone()), &k).unwrap();
        assert!(data.f0.max_abs() < 1e-14);
        assert!(data.f1.sub(&f).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn time_reversal_flips_position_data_only() {
        let g = LatticeGrid::new(2, 16, 0.5, 0.5).unwrap();
        let k = PropagatorKernel::new(&g);
        let src = SpacetimeSource::new(vec![
            SourceSlice { time: -0.7, weight: 1.0, field: smooth(&g, &[1.0, 0.0], 1.5) },
            SourceSlice { time: 0.3, weight: -0.4, field: smooth(&g, &[-1.0, 0.5], 1.5) },
        ])
        .unwrap();
        let fwd = propagate_to_cauchy_data(&src, &k).unwrap();
        let rev = propagate_to_cauchy_data(&src.time_reversed(), &k).unwrap();
        assert!(fwd.f0.add(&rev.f0).unwrap().max_abs() < 1e-13);
        assert!(fwd.f1.sub(&rev.f1).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn opposite_slices_are_antisymmetric_under_exchange() {
        let g = LatticeGrid::new(2, 16, 0.5, 0.5).unwrap();
        let k = PropagatorKernel::new(&g);
        let h = smooth(&g, &[0.5, 0.0], 1.5);
        let make = |w: f64| {
            SpacetimeSource::new(vec![
                SourceSlice { time: -0.6, weight: w, field: h.clone() },
                SourceSlice { time: 0.9, weight: -w, field: h.clone() },
            ])
            .unwrap()
        };
        let a = propagate_to_cauchy_data(&make(1.0), &k).unwrap();
        let b = propagate_to_cauchy_data(&make(-1.0), &k).unwrap();
        assert!(a.max_abs() > 1e-3);
        assert!(a.add(&b).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn duhamel_matches_leapfrog_oracle() {
        let g = LatticeGrid::new(2, 64, 0.25, 1.0).unwrap();
        let k = PropagatorKernel::new(&g);
        let src = SpacetimeSource::new(vec![
            SourceSlice { time: -1.0, weight: 0.5, field: smooth(&g, &[1.0, -0.5], 2.5) },
            SourceSlice { time: 0.5, weight: 1.0, field: smooth(&g, &[-1.0, 1.0], 2.0) },
        ])
        .unwrap();
        let exact = propagate_to_cauchy_data(&src, &k).unwrap();
        let lf = leapfrog_cauchy_data(&src, &k, 2e-3).unwrap();
        let err = lf.sub(&exact).unwrap().max_abs() / exact.max_abs();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn e_is_difference_of_retarded_and_advanced() {
        let g = LatticeGrid::new(2, 16, 0.5, 0.0).unwrap();
        let k = PropagatorKernel::new(&g);
        let src = SpacetimeSource::new(vec![
            SourceSlice { time: -0.5, weight: 1.0, field: smooth(&g, &[0.0, 0.0], 1.2) },
            SourceSlice { time: 0.8, weight: -0.3, field: smooth(&g, &[1.0, 0.0], 1.2) },
        ])
        .unwrap();
        for t in [-1.0, 0.1, 2.0] {
            let e = solution_at(&src, &k, t).unwrap();
            let r = causal_field(&src, &k, t, CausalDirection::Retarded).unwrap();
            let a = causal_field(&src, &k, t, CausalDirection::Advanced).unwrap();
            assert!(r.sub(&a).unwrap().sub(&e).unwrap().max_abs() < 1e-10);
        }
    }

    #[test]
    fn advanced_field_before_the_source_lies_outside_the_forward_shadow() {
        let g = LatticeGrid::new(2, 32, 0.25, 0.0).unwrap();
        let k = PropagatorKernel::new(&g);
        let src = SpacetimeSource::single(0.0, smooth(&g, &[0.0, 0.0], 1.0));
        let rep = support_fraction(&src, &k, -1.5, 4.0, CausalDirection::Advanced).unwrap();
        assert_eq!(rep.fraction, 1.0);
        assert_eq!(rep.outside_sites, g.len());
    }

    #[test]
    fn huygens_preconditions() {
        let g = LatticeGrid::new(2, 16, 0.5, 0.0).unwrap();
        assert!(huygens_check(&PropagatorKernel::new(&g), 2.0, 4.0).is_err());
        let g = LatticeGrid::new(3, 16, 0.5, 1.0).unwrap();
        assert!(huygens_check(&PropagatorKernel::new(&g), 2.0, 4.0).is_err());
    }

    fn random_source(g: &LatticeGrid, seed: u64) -> SpacetimeSource {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t0 = rng.gen_range(-1.5..-0.1);
        let t1 = rng.gen_range(0.1..1.5);
        let c0 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let c1 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        SpacetimeSource::new(vec![
            SourceSlice { time: t0, weight: rng.gen_range(0.5..1.5), field: smooth(g, &c0, 1.2) },
            SourceSlice { time: t1, weight: rng.gen_range(-1.5..-0.5), field: smooth(g, &c1, 1.0) },
        ])
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn commutator_pairing_is_antisymmetric(a in 0u64..10_000, b in 0u64..10_000) {
            let g = LatticeGrid::new(2, 16, 0.5, 0.4).unwrap();
            let k = PropagatorKernel::new(&g);
            let f = random_source(&g, a);
            let h = random_source(&g, b);
            let fh = pairing(&f, &h, &k).unwrap();
            let hf = pairing(&h, &f, &k).unwrap();
            prop_assert!((fh + hf).abs() < 1e-10 * fh.abs().max(1.0));
        }

        #[test]
        fn time_flip_negates_the_kernel(t in -3.5f64..3.5) {
            let g = LatticeGrid::new(1, 16, 0.5, 0.0).unwrap();
            let k = PropagatorKernel::new(&g);
            let p = k.slice(t).unwrap();
            let m = k.slice(-t).unwrap();
            prop_assert!(p.add(&m).unwrap().max_abs() < 1e-14);
        }
    }
}
