use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, TAU};
use std::marker::PhantomData;

use duality_core::cauchy::CauchyDatum;
use duality_core::em_space::{
    boost_region_duality, em_duality_check, em_inner, em_symplectic, gauge_class_support, random_em_datum,
    two_form_norms,
};
use duality_core::field::LatticeField;
use duality_core::fock::{one_particle_norm, relative_commutant_dims, FockContext, RealSubspace};
use duality_core::geometry::{
    causal_complement, ray_inversion, spacelike_to_all, Base, ConformalMap, Point, Region, Surface, SurfacePatch,
};
use duality_core::grid::LatticeGrid;
use duality_core::mask::SiteSet;
use duality_core::propagator::{huygens_check, huygens_ratio, PropagatorKernel};
use duality_core::scalar_space::{
    duality_check, forward_cone_density_residual, forward_cone_sources, mollifier_convergence,
    outer_regularity_scan, random_smooth_datum, ring_inflations,
};
use duality_core::spectral::{
    bump_profile, diffeo_norm_check, diffeo_pullback, dilation, fractional_constant, fractional_identity,
    infrared_hs_norm, mult_operator_norm_estimate, norm_pm, schur_bound_check, DiffeoSpec, PowerIteration, Sign,
};
use duality_core::symplectic::Tolerances;
use duality_core::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::campaign::{Check, JobConfig, JobOutcome, Series};

pub const MAX_GRID_SITES: usize = 1 << 22;
/// Largest dense symplectic chart (real dimension) a job may request.
pub const MAX_DENSE_DIM: usize = 4096;
/// Largest number of momentum pairs a Schur scan may visit.
pub const MAX_PAIR_WORK: f64 = 2e9;
/// Entry budget for explicit infrared Hilbert–Schmidt matrices.
pub const HS_MATRIX_BUDGET: usize = 1 << 26;

#[derive(Clone, Copy, Debug, Default)]
pub struct Cost {
    pub grid_sites: usize,
    pub dense_dim: usize,
    pub pair_work: f64,
}

impl Cost {
    fn grid(d: usize, n: usize) -> Self {
        Self {
            grid_sites: n.saturating_pow(d as u32),
            ..Self::default()
        }
    }

    fn max(self, other: Self) -> Self {
        Self {
            grid_sites: self.grid_sites.max(other.grid_sites),
            dense_dim: self.dense_dim.max(other.dense_dim),
            pair_work: self.pair_work.max(other.pair_work),
        }
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if self.grid_sites > MAX_GRID_SITES {
            return Err(format!("{} lattice sites exceed {MAX_GRID_SITES}", self.grid_sites));
        }
        if self.dense_dim > MAX_DENSE_DIM {
            return Err(format!("dense chart of dimension {} exceeds {MAX_DENSE_DIM}", self.dense_dim));
        }
        if self.pair_work > MAX_PAIR_WORK {
            return Err(format!("{:.2e} momentum pairs exceed {MAX_PAIR_WORK:.0e}", self.pair_work));
        }
        Ok(())
    }
}

pub trait Task: Send + Sync {
    fn cost(&self) -> Cost;
    fn run(&self, seed: u64) -> Result<JobOutcome>;
    /// Parameters, tolerances and schedule after defaults are filled in.
    fn effective(&self) -> (Value, Value, Vec<f64>);
}

trait Op: 'static {
    const MODULE: &'static str;
    const NAME: &'static str;
    const SUMMARY: &'static str;
    type Params: Serialize + DeserializeOwned + Default + Send + Sync;
    type Tols: Serialize + DeserializeOwned + Default + Send + Sync;

    fn default_schedule() -> Vec<f64>;
    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String>;
    fn cost(p: &Self::Params, schedule: &[f64]) -> Cost;
    fn run(p: &Self::Params, t: &Self::Tols, schedule: &[f64], seed: u64) -> Result<JobOutcome>;
}

struct Prepared<O: Op> {
    params: O::Params,
    tols: O::Tols,
    schedule: Vec<f64>,
    op: PhantomData<fn() -> O>,
}

impl<O: Op> Task for Prepared<O> {
    fn cost(&self) -> Cost {
        O::cost(&self.params, &self.schedule)
    }

    fn run(&self, seed: u64) -> Result<JobOutcome> {
        O::run(&self.params, &self.tols, &self.schedule, seed)
    }

    fn effective(&self) -> (Value, Value, Vec<f64>) {
        (to_value(&self.params), to_value(&self.tols), self.schedule.clone())
    }
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn prepare_op<O: Op>(config: &JobConfig) -> std::result::Result<Box<dyn Task>, String> {
    let section = |v: &Value, what: &str| -> std::result::Result<Value, String> {
        match v {
            Value::Null => Ok(json!({})),
            Value::Object(_) => Ok(v.clone()),
            _ => Err(format!("{what} must be an object")),
        }
    };
    let params: O::Params = serde_json::from_value(section(&config.parameters, "parameters")?)
        .map_err(|e| format!("parameters: {e}"))?;
    let tols: O::Tols = serde_json::from_value(section(&config.tolerances, "tolerances")?)
        .map_err(|e| format!("tolerances: {e}"))?;
    if let Value::Object(map) = to_value(&tols) {
        for (k, v) in map {
            if !v.as_f64().is_some_and(|x| x.is_finite() && x > 0.0) {
                return Err(format!("tolerance {k} must be a positive number"));
            }
        }
    }
    let schedule = config.schedule.clone().unwrap_or_else(O::default_schedule);
    if schedule.iter().any(|x| !x.is_finite()) {
        return Err("schedule entries must be finite".into());
    }
    if schedule.is_empty() && !O::default_schedule().is_empty() {
        return Err("schedule must not be empty".into());
    }
    O::validate(&params, &schedule)?;
    Ok(Box::new(Prepared::<O> {
        params,
        tols,
        schedule,
        op: PhantomData,
    }))
}

pub struct OpEntry {
    pub module: &'static str,
    pub name: &'static str,
    pub summary: &'static str,
    prepare: fn(&JobConfig) -> std::result::Result<Box<dyn Task>, String>,
    defaults: fn() -> (Value, Value, Vec<f64>),
}

impl OpEntry {
    pub fn defaults(&self) -> (Value, Value, Vec<f64>) {
        (self.defaults)()
    }
}

fn entry<O: Op>() -> OpEntry {
    OpEntry {
        module: O::MODULE,
        name: O::NAME,
        summary: O::SUMMARY,
        prepare: prepare_op::<O>,
        defaults: || {
            (
                to_value(&O::Params::default()),
                to_value(&O::Tols::default()),
                O::default_schedule(),
            )
        },
    }
}

pub fn registry() -> Vec<OpEntry> {
    vec![
        entry::<PropagatorIdentities>(),
        entry::<Huygens>(),
        entry::<ScalarDuality>(),
        entry::<OuterRegularity>(),
        entry::<Mollifier>(),
        entry::<Density>(),
        entry::<MultOperator>(),
        entry::<Diffeo>(),
        entry::<Dilation>(),
        entry::<Fractional>(),
        entry::<EmStructure>(),
        entry::<EmDuality>(),
        entry::<BoostRegion>(),
        entry::<FockCcr>(),
        entry::<FockCommutant>(),
        entry::<ComplementProbes>(),
        entry::<Conformal>(),
    ]
}

pub fn prepare(config: &JobConfig) -> std::result::Result<Box<dyn Task>, String> {
    let reg = registry();
    let Some(op) = reg
        .iter()
        .find(|e| e.module == config.module && e.name == config.operation)
    else {
        if reg.iter().any(|e| e.module == config.module) {
            return Err(format!("module {} has no operation {}", config.module, config.operation));
        }
        return Err(format!("unknown module {}", config.module));
    };
    (op.prepare)(config)
}

fn check_grid(d: usize, n: usize, a: f64, m: f64) -> std::result::Result<(), String> {
    if n.checked_pow(d as u32).is_none_or(|len| len > MAX_GRID_SITES * 4) {
        return Err(format!("lattice {n}^{d} is out of range"));
    }
    LatticeGrid::new(d, n, a, m).map(|_| ()).map_err(|e| e.to_string())
}

fn sizes(schedule: &[f64], what: &str) -> std::result::Result<Vec<usize>, String> {
    schedule
        .iter()
        .map(|&x| {
            if x >= 1.0 && x.fract() == 0.0 && x < 1e9 {
                Ok(x as usize)
            } else {
                Err(format!("{what} schedule entries must be positive integers, got {x}"))
            }
        })
        .collect()
}

fn sites_of(schedule: &[f64]) -> Vec<usize> {
    schedule.iter().map(|&x| x as usize).collect()
}

fn cube_sites(d: usize, half_width: f64, a: f64) -> usize {
    let per_axis = 2 * (half_width / a).floor() as usize + 1;
    per_axis.saturating_pow(d as u32)
}

fn mean_free(g: &LatticeGrid, rng: &mut ChaCha8Rng) -> Result<LatticeField> {
    LatticeField::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn radial_bump(x: &[f64], radius: f64) -> f64 {
    bump_profile(x.iter().map(|v| v * v).sum::<f64>().sqrt() / radius)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

// ---------------------------------------------------------------- propagator

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IdentityParams {
    dims: Vec<usize>,
    masses: Vec<f64>,
    sites: usize,
    spacing: f64,
}

impl Default for IdentityParams {
    fn default() -> Self {
        Self { dims: vec![1, 2, 3], masses: vec![0.0, 1.0], sites: 64, spacing: 0.25 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IdentityTols {
    identity: f64,
}

impl Default for IdentityTols {
    fn default() -> Self {
        Self { identity: 1e-10 }
    }
}

struct PropagatorIdentities;

impl Op for PropagatorIdentities {
    const MODULE: &'static str = "propagator";
    const NAME: &'static str = "identities";
    const SUMMARY: &'static str = "Δ(0,·) = 0 and ∂tΔ(0,·) = lattice delta";
    type Params = IdentityParams;
    type Tols = IdentityTols;

    fn default_schedule() -> Vec<f64> {
        vec![]
    }

    fn validate(p: &Self::Params, _: &[f64]) -> std::result::Result<(), String> {
        if p.dims.is_empty() || p.masses.is_empty() {
            return Err("dims and masses must be non-empty".into());
        }
        for &d in &p.dims {
            for &m in &p.masses {
                check_grid(d, p.sites, p.spacing, m)?;
            }
        }
        Ok(())
    }

    fn cost(p: &Self::Params, _: &[f64]) -> Cost {
        Cost::grid(p.dims.iter().copied().max().unwrap_or(1), p.sites)
    }

    fn run(p: &Self::Params, t: &Self::Tols, _: &[f64], _: u64) -> Result<JobOutcome> {
        let mut series = Series::new(&["d", "m", "slice_max", "velocity_error"]);
        let mut checks = vec![];
        for &d in &p.dims {
            for &m in &p.masses {
                let g = LatticeGrid::new(d, p.sites, p.spacing, m)?;
                let k = PropagatorKernel::new(&g);
                let delta = LatticeField::delta(&g, 0);
                let scale = delta.max_abs();
                let slice = k.slice(0.0)?.max_abs() / scale;
                let vel = k.time_derivative(0.0)?.sub(&delta)?.max_abs() / scale;
                checks.push(Check::below(format!("slice d={d} m={m}"), slice, t.identity));
                checks.push(Check::below(format!("velocity d={d} m={m}"), vel, t.identity));
                series.push(vec![d as f64, m, slice, vel]);
            }
        }
        Ok(JobOutcome { checks, data: json!({}), series })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HuygensParams {
    dim: usize,
    mass: f64,
    extent: f64,
    time: f64,
    shell_width: f64,
    control_mass: f64,
}

impl Default for HuygensParams {
    fn default() -> Self {
        Self { dim: 3, mass: 0.0, extent: 16.0, time: 4.0, shell_width: 0.5, control_mass: 1.0 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HuygensTols {
    max_ratio: f64,
    min_control_ratio: f64,
}

impl Default for HuygensTols {
    fn default() -> Self {
        Self { max_ratio: 0.05, min_control_ratio: 0.2 }
    }
}

struct Huygens;

impl Op for Huygens {
    const MODULE: &'static str = "propagator";
    const NAME: &'static str = "huygens";
    const SUMMARY: &'static str = "interior suppression of the smeared commutator function; schedule = sites per axis";
    type Params = HuygensParams;
    type Tols = HuygensTols;

    fn default_schedule() -> Vec<f64> {
        vec![64.0, 128.0]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        for n in sizes(schedule, "sites")? {
            check_grid(p.dim, n, p.extent / n as f64, p.mass)?;
        }
        if !(p.time > p.shell_width && p.shell_width > 0.0 && p.time < p.extent / 2.0) {
            return Err("need 0 < shell_width < time < extent/2".into());
        }
        Ok(())
    }

    fn cost(p: &Self::Params, schedule: &[f64]) -> Cost {
        Cost::grid(p.dim, sites_of(schedule).into_iter().max().unwrap_or(0))
    }

    fn run(p: &Self::Params, t: &Self::Tols, schedule: &[f64], _: u64) -> Result<JobOutcome> {
        let mut series = Series::new(&["sites", "spacing", "ratio"]);
        let mut ratios = vec![];
        for n in sites_of(schedule) {
            let g = LatticeGrid::new(p.dim, n, p.extent / n as f64, p.mass)?;
            let rep = huygens_check(&PropagatorKernel::new(&g), p.time, p.shell_width / g.spacing())?;
            series.push(vec![n as f64, g.spacing(), rep.ratio]);
            ratios.push(rep.ratio);
        }
        let n0 = sites_of(schedule)[0];
        let g = LatticeGrid::new(p.dim, n0, p.extent / n0 as f64, p.control_mass)?;
        let control = huygens_ratio(&PropagatorKernel::new(&g), p.time, p.shell_width / g.spacing())?.ratio;
        let checks = vec![
            Check::below(format!("ratio at {n0} sites"), ratios[0], t.max_ratio),
            Check::holds("ratio decreases under refinement", strictly_decreasing(&ratios)),
            Check::above("massive control ratio", control, t.min_control_ratio),
        ];
        Ok(JobOutcome { checks, data: json!({ "ratios": ratios, "control_ratio": control }), series })
    }
}

// ---------------------------------------------------------------- scalar_space

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScalarDualityParams {
    dim: usize,
    masses: Vec<f64>,
    spacing: f64,
    ambient_half_width: f64,
    region_radius: f64,
}

impl Default for ScalarDualityParams {
    fn default() -> Self {
        Self { dim: 2, masses: vec![0.0, 1.0], spacing: 1.0, ambient_half_width: 5.0, region_radius: 3.0 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GapTols {
    gap: f64,
}

impl Default for GapTols {
    fn default() -> Self {
        Self { gap: 1e-8 }
    }
}

struct ScalarDuality;

impl Op for ScalarDuality {
    const MODULE: &'static str = "scalar_space";
    const NAME: &'static str = "duality";
    const SUMMARY: &'static str = "relative duality of a ball inside a cube; schedule = sites per axis";
    type Params = ScalarDualityParams;
    type Tols = GapTols;

    fn default_schedule() -> Vec<f64> {
        vec![16.0, 32.0]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        for n in sizes(schedule, "sites")? {
            for &m in &p.masses {
                check_grid(p.dim, n, p.spacing, m)?;
            }
        }
        if p.masses.is_empty() || p.region_radius <= 0.0 || p.ambient_half_width <= 0.0 {
            return Err("need masses and positive region sizes".into());
        }
        Ok(())
    }

    fn cost(p: &Self::Params, schedule: &[f64]) -> Cost {
        let n = sites_of(schedule).into_iter().max().unwrap_or(0);
        Cost { dense_dim: 2 * cube_sites(p.dim, p.ambient_half_width, p.spacing), ..Cost::grid(p.dim, n) }
    }

    fn run(p: &Self::Params, t: &Self::Tols, schedule: &[f64], _: u64) -> Result<JobOutcome> {
        let mut series = Series::new(&["sites", "mass", "region_dim", "complement_dim", "gap_forward", "gap_dual"]);
        let mut checks = vec![];
        let mut notes = vec![];
        let centre = vec![0.0; p.dim];
        for n in sites_of(schedule) {
            for &m in &p.masses {
                let g = LatticeGrid::new(p.dim, n, p.spacing, m)?;
                let mm = SiteSet::cube(&g, &centre, p.ambient_half_width);
                let b = SiteSet::ball(&g, &centre, p.region_radius);
                let rep = duality_check(&g, &b, &mm, Tolerances::default())?;
                checks.push(Check::below(format!("gap_forward N={n} m={m}"), rep.gap_forward, t.gap));
                checks.push(Check::below(format!("gap_dual N={n} m={m}"), rep.gap_dual, t.gap));
                checks.push(Check::holds(format!("finite-dimensional label N={n} m={m}"), rep.finite_dimensional));
                series.push(vec![
                    n as f64,
                    m,
                    rep.region_dim as f64,
                    rep.complement_dim as f64,
                    rep.gap_forward,
                    rep.gap_dual,
                ]);
                notes.push(to_value(&rep));
            }
        }
        Ok(JobOutcome { checks, data: json!({ "reports": notes }), series })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OuterParams {
    dim: usize,
    sites: usize,
    spacing: f64,
    masses: Vec<f64>,
    region_radius: f64,
}

impl Default for OuterParams {
    fn default() -> Self {
        Self { dim: 2, sites: 32, spacing: 1.0, masses: vec![0.0, 1.0], region_radius: 3.0 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FloorTols {
    floor: f64,
}

impl Default for FloorTols {
    fn default() -> Self {
        Self { floor: 1e-8 }
    }
}

struct OuterRegularity;

impl Op for OuterRegularity {
    const MODULE: &'static str = "scalar_space";
    const NAME: &'static str = "outer-regularity";
    const SUMMARY: &'static str = "gap series of shrinking ring inflations against the closure; schedule = ring counts, ending at 1";
    type Params = OuterParams;
    type Tols = FloorTols;

    fn default_schedule() -> Vec<f64> {
        vec![4.0, 3.0, 2.0, 1.0]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        let rings = sizes(schedule, "ring")?;
        if rings.windows(2).any(|w| w[1] > w[0]) {
            return Err("ring counts must be non-increasing".into());
        }
        for &m in &p.masses {
            check_grid(p.dim, p.sites, p.spacing, m)?;
        }
        if p.masses.is_empty() || p.region_radius <= 0.0 {
            return Err("need masses and a positive region radius".into());
        }
        Ok(())
    }

    fn cost(p: &Self::Params, schedule: &[f64]) -> Cost {
        let rings = sites_of(schedule).into_iter().max().unwrap_or(0) as f64;
        let hw = p.region_radius + rings * p.spacing;
        Cost { dense_dim: 2 * cube_sites(p.dim, hw, p.spacing), ..Cost::grid(p.dim, p.sites) }
    }

    fn run(p: &Self::Params, t: &Self::Tols, schedule: &[f64], _: u64) -> Result<JobOutcome> {
        let rings = sites_of(schedule);
        let mut series = Series::new(&["mass", "rings", "sites", "gap", "excess_dim"]);
        let mut checks = vec![];
        let mut floors = vec![];
        for &m in &p.masses {
            let g = LatticeGrid::new(p.dim, p.sites, p.spacing, m)?;
            let b = SiteSet::ball(&g, &vec![0.0; p.dim], p.region_radius);
            let rep = outer_regularity_scan(&g, &b, &ring_inflations(&b, &rings), Tolerances::default())?;
            for (k, &r) in rings.iter().enumerate() {
                series.push(vec![m, r as f64, rep.neighborhood_sites[k] as f64, rep.gaps[k], rep.excess_dims[k] as f64]);
            }
            checks.push(Check::holds(format!("non-increasing m={m}"), rep.non_increasing));
            if rings.last() == Some(&1) {
                let last = *rep.gaps.last().expect("schedule is non-empty");
                checks.push(Check::below(format!("closure reached m={m}"), last, t.floor));
            }
            floors.push(json!({ "mass": m, "floor_gap": rep.floor_gap, "floor_excess_dim": rep.floor_excess_dim }));
        }
        Ok(JobOutcome { checks, data: json!({ "floors": floors }), series })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MollifierParams {
    dim: usize,
    sites: usize,
    spacing: f64,
    mass: f64,
    bump_radius: f64,
    bumps: usize,
    cut_radius: f64,
    samples: usize,
}

impl Default for MollifierParams {
    fn default() -> Self {
        Self {
            dim: 2,
            sites: 64,
            spacing: 1.0 / 32.0,
            mass: 1.0,
            bump_radius: 0.35,
            bumps: 2,
            cut_radius: 0.7,
            samples: 3,
        }
    }
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NoTols {}

struct Mollifier;

impl Op for Mollifier {
    const MODULE: &'static str = "scalar_space";
    const NAME: &'static str = "mollifier";
    const SUMMARY: &'static str = "support inclusion and error decrease of mollified data; schedule = mollifier indices n";
    type Params = MollifierParams;
    type Tols = NoTols;

    fn default_schedule() -> Vec<f64> {
        vec![4.0, 8.0, 16.0]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        sizes(schedule, "mollifier")?;
        if p.samples == 0 || p.bumps == 0 {
            return Err("samples and bumps must be positive".into());
        }
        check_grid(p.dim, p.sites, p.spacing, p.mass)
    }

    fn cost(p: &Self::Params, _: &[f64]) -> Cost {
        Cost::grid(p.dim, p.sites)
    }

    fn run(p: &Self::Params, _: &Self::Tols, schedule: &[f64], seed: u64) -> Result<JobOutcome> {
        let g = LatticeGrid::new(p.dim, p.sites, p.spacing, p.mass)?;
        let ns: Vec<u32> = schedule.iter().map(|&x| x as u32).collect();
        let cut = SiteSet::ball(&g, &vec![0.0; p.dim], p.cut_radius).indicator();
        let mut series = Series::new(&["sample", "n", "error", "relative_error"]);
        let mut checks = vec![];
        for s in 0..p.samples {
            let f = random_smooth_datum(&g, p.bump_radius, p.bumps, seed.wrapping_add(s as u64));
            let f = CauchyDatum::new(f.f0.mul(&cut)?, f.f1.mul(&cut)?)?;
            let rep = mollifier_convergence(&f, &ns)?;
            for (k, &n) in ns.iter().enumerate() {
                series.push(vec![s as f64, n as f64, rep.errors[k], rep.relative_errors[k]]);
            }
            checks.push(Check::holds(format!("support inclusion sample {s}"), rep.support_ok.iter().all(|&b| b)));
            checks.push(Check::holds(format!("strict decrease sample {s}"), rep.strictly_decreasing));
        }
        Ok(JobOutcome { checks, data: json!({}), series })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DensityParams {
    dim: usize,
    sites: usize,
    spacing: f64,
    masses: Vec<f64>,
    targets: usize,
    target_radius: f64,
    target_bumps: usize,
    family: usize,
}

impl Default for DensityParams {
    fn default() -> Self {
        Self {
            dim: 2,
            sites: 16,
            spacing: 1.0,
            masses: vec![0.05, 1.0],
            targets: 5,
            target_radius: 3.0,
            target_bumps: 3,
            family: 48,
        }
    }
}

struct Density;

impl Op for Density {
    const MODULE: &'static str = "scalar_space";
    const NAME: &'static str = "density";
    const SUMMARY: &'static str = "projection residuals onto forward-cone data (trend only); schedule = family prefix sizes";
    type Params = DensityParams;
    type Tols = NoTols;

    fn default_schedule() -> Vec<f64> {
        vec![6.0, 12.0, 24.0, 48.0]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        let s = sizes(schedule, "family")?;
        if s.iter().any(|&k| k > p.family) {
            return Err("family prefix larger than the family".into());
        }
        if p.masses.is_empty() || p.masses.iter().any(|&m| m <= 0.0) {
            return Err("density needs positive masses".into());
        }
        if p.targets == 0 || p.target_bumps == 0 {
            return Err("targets and target_bumps must be positive".into());
        }
        for &m in &p.masses {
            check_grid(p.dim, p.sites, p.spacing, m)?;
        }
        Ok(())
    }

    fn cost(p: &Self::Params, _: &[f64]) -> Cost {
        let c = Cost::grid(p.dim, p.sites);
        Cost { dense_dim: 2 * c.grid_sites, ..c }
    }

    fn run(p: &Self::Params, _: &Self::Tols, schedule: &[f64], seed: u64) -> Result<JobOutcome> {
        let sizes = sites_of(schedule);
        let mut series = Series::new(&["mass", "family_size", "span_dim", "mean_residual", "max_residual"]);
        let mut checks = vec![];
        for &m in &p.masses {
            let g = LatticeGrid::new(p.dim, p.sites, p.spacing, m)?;
            let k = PropagatorKernel::new(&g);
            let family = forward_cone_sources(&g, p.family, seed);
            let targets: Vec<CauchyDatum> = (0..p.targets)
                .map(|s| random_smooth_datum(&g, p.target_radius, p.target_bumps, seed.wrapping_add(1000 + s as u64)))
                .collect();
            let rep = forward_cone_density_residual(&targets, &family, &k, &sizes, Tolerances::default())?;
            for (j, &size) in sizes.iter().enumerate() {
                let col: Vec<f64> = rep.residuals.iter().map(|r| r[j]).collect();
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                let max = col.iter().cloned().fold(0.0, f64::max);
                series.push(vec![m, size as f64, rep.span_dims[j] as f64, mean, max]);
            }
            checks.push(Check::holds(format!("residuals non-increasing m={m}"), rep.non_increasing));
        }
        Ok(JobOutcome { checks, data: json!({ "note": "trend only, no continuum threshold" }), series })
    }
}

// ---------------------------------------------------------------- spectral

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MultParams {
    dim: usize,
    extent: f64,
    chi_radius: f64,
    hs_max_sites: usize,
    max_iter: usize,
}

impl Default for MultParams {
    fn default() -> Self {
        Self { dim: 2, extent: 16.0, chi_radius: 3.0, hs_max_sites: 64, max_iter: 200 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MultTols {
    norm_spread: f64,
    hs_change: f64,
}

impl Default for MultTols {
    fn default() -> Self {
        Self { norm_spread: 0.1, hs_change: 0.05 }
    }
}

struct MultOperator;

impl Op for MultOperator {
    const MODULE: &'static str = "spectral";
    const NAME: &'static str = "mult-operator";
    const SUMMARY: &'static str = "ω^{±1/2} M_χ ω^{∓1/2}: norm stability, Schur domination, infrared HS convergence; schedule = sites per axis";
    type Params = MultParams;
    type Tols = MultTols;

    fn default_schedule() -> Vec<f64> {
        vec![32.0, 64.0, 128.0]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        for n in sizes(schedule, "sites")? {
            check_grid(p.dim, n, p.extent / n as f64, 0.0)?;
        }
        if p.chi_radius <= 0.0 || p.max_iter == 0 {
            return Err("chi_radius and max_iter must be positive".into());
        }
        Ok(())
    }

    fn cost(p: &Self::Params, schedule: &[f64]) -> Cost {
        let c = Cost::grid(p.dim, sites_of(schedule).into_iter().max().unwrap_or(0));
        Cost { pair_work: (c.grid_sites as f64).powi(2), ..c }
    }

    fn run(p: &Self::Params, t: &Self::Tols, schedule: &[f64], seed: u64) -> Result<JobOutcome> {
        let opts = PowerIteration { max_iter: p.max_iter, seed, ..PowerIteration::default() };
        let mut series = Series::new(&["sites", "sign", "norm", "schur_bound", "uv_block_norm", "ir_hs_norm"]);
        let mut norms = [vec![], vec![]];
        let mut hs = [vec![], vec![]];
        let mut checks = vec![];
        for n in sites_of(schedule) {
            let g = LatticeGrid::new(p.dim, n, p.extent / n as f64, 0.0)?;
            let chi = LatticeField::from_fn(&g, |x| radial_bump(x, p.chi_radius));
            for (slot, sign) in Sign::both().into_iter().enumerate() {
                let norm = mult_operator_norm_estimate(&chi, sign, opts).value;
                let schur = schur_bound_check(&chi, sign, opts);
                let h = if n <= p.hs_max_sites {
                    let v = infrared_hs_norm(&chi, sign, HS_MATRIX_BUDGET)?;
                    hs[slot].push(v);
                    v
                } else {
                    f64::NAN
                };
                norms[slot].push(norm);
                checks.push(Check::holds(format!("Schur dominates N={n} sign={}", sign.value()), schur.dominated));
                series.push(vec![n as f64, sign.value(), norm, schur.bound, schur.block_norm.value, h]);
            }
        }
        for (slot, sign) in Sign::both().into_iter().enumerate() {
            let hi = norms[slot].iter().cloned().fold(f64::MIN, f64::max);
            let lo = norms[slot].iter().cloned().fold(f64::MAX, f64::min);
            checks.push(Check::below(format!("norm spread sign={}", sign.value()), hi / lo - 1.0, t.norm_spread));
            for w in hs[slot].windows(2) {
                checks.push(Check::below(format!("HS change sign={}", sign.value()), (w[1] / w[0] - 1.0).abs(), t.hs_change));
            }
        }
        Ok(JobOutcome { checks, data: json!({}), series })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DiffeoParams {
    sites: usize,
    spacing: f64,
    radius: f64,
    probe_radius: f64,
}

impl Default for DiffeoParams {
    fn default() -> Self {
        Self { sites: 64, spacing: 0.125, radius: 1.0, probe_radius: 1.5 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SlackTols {
    slack: f64,
}

impl Default for SlackTols {
    fn default() -> Self {
        Self { slack: 0.05 }
    }
}

struct Diffeo;

impl Op for Diffeo {
    const MODULE: &'static str = "spectral";
    const NAME: &'static str = "diffeo";
    const SUMMARY: &'static str = "diffeomorphism pullback norms against (1-b)^{-2d}(1+b)^{d±1} in d=2; schedule = b_λ values";
    type Params = DiffeoParams;
    type Tols = SlackTols;

    fn default_schedule() -> Vec<f64> {
        vec![0.2, 0.1, 0.05]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        if schedule.iter().any(|&b| !(0.0..1.0).contains(&b)) {
            return Err("b_λ must lie in [0, 1)".into());
        }
        check_grid(2, p.sites, p.spacing, 0.0)
    }

    fn cost(p: &Self::Params, _: &[f64]) -> Cost {
        Cost::grid(2, p.sites)
    }

    fn run(p: &Self::Params, t: &Self::Tols, schedule: &[f64], seed: u64) -> Result<JobOutcome> {
        let g = LatticeGrid::new(2, p.sites, p.spacing, 0.0)?;
        let opts = PowerIteration { seed, ..PowerIteration::default() };
        let f0 = LatticeField::from_fn(&g, |x| radial_bump(x, p.probe_radius) * x[0]);
        let mut series = Series::new(&["b", "measured_plus_sq", "bound_plus_sq", "measured_minus_sq", "bound_minus_sq", "pullback_deviation"]);
        let mut checks = vec![];
        let mut deviations = vec![];
        for &b in schedule {
            let spec = DiffeoSpec::with_b(p.radius, b)?;
            let rep = diffeo_norm_check(&g, &spec, t.slack, opts)?;
            let (moved, _) = diffeo_pullback(&f0, &f0, &spec)?;
            let dev = norm_pm(&moved.sub(&f0)?, Sign::Plus)?;
            deviations.push(dev);
            checks.push(Check::holds(format!("bound holds b={b}"), rep.within_bound));
            series.push(vec![b, rep.measured_plus_sq, rep.bound_plus_sq, rep.measured_minus_sq, rep.bound_minus_sq, dev]);
        }
        checks.push(Check::holds("pullback converges to the identity", strictly_decreasing(&deviations)));
        Ok(JobOutcome { checks, data: json!({}), series })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DilationParams {
    sites: usize,
    spacing: f64,
    lambda: f64,
}

impl Default for DilationParams {
    fn default() -> Self {
        Self { sites: 128, spacing: 1.0 / 16.0, lambda: 0.9 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DriftTols {
    norm_drift: f64,
}

impl Default for DriftTols {
    fn default() -> Self {
        Self { norm_drift: 1e-3 }
    }
}

struct Dilation;

impl Op for Dilation {
    const MODULE: &'static str = "spectral";
    const NAME: &'static str = "dilation";
    const SUMMARY: &'static str = "massless norm preservation and strong convergence of dilations in d=2; schedule = λ values approaching 1";
    type Params = DilationParams;
    type Tols = DriftTols;

    fn default_schedule() -> Vec<f64> {
        vec![0.9, 0.95, 0.99]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        if schedule.iter().chain([&p.lambda]).any(|&l| l <= 0.0) {
            return Err("λ must be positive".into());
        }
        check_grid(2, p.sites, p.spacing, 0.0)
    }

    fn cost(p: &Self::Params, _: &[f64]) -> Cost {
        Cost::grid(2, p.sites)
    }

    fn run(p: &Self::Params, t: &Self::Tols, schedule: &[f64], _: u64) -> Result<JobOutcome> {
        let g = LatticeGrid::new(2, p.sites, p.spacing, 0.0)?;
        let h0 = LatticeField::from_fn(&g, |x| radial_bump(x, 1.5) * x[0]);
        let h1 = LatticeField::from_fn(&g, |x| radial_bump(x, 1.2) * x[1]);
        let (d0, d1) = dilation(&h0, &h1, p.lambda)?;
        let drift0 = (norm_pm(&d0, Sign::Plus)? / norm_pm(&h0, Sign::Plus)? - 1.0).abs();
        let drift1 = (norm_pm(&d1.without_mean(), Sign::Minus)? / norm_pm(&h1, Sign::Minus)? - 1.0).abs();
        let mut series = Series::new(&["lambda", "deviation"]);
        let mut devs = vec![];
        for &l in schedule {
            let (d0, _) = dilation(&h0, &h1, l)?;
            let dev = norm_pm(&d0.sub(&h0)?, Sign::Plus)?;
            devs.push(dev);
            series.push(vec![l, dev]);
        }
        let checks = vec![
            Check::below("norm drift, first component", drift0, t.norm_drift),
            Check::below("norm drift, second component", drift1, t.norm_drift),
            Check::holds("strong convergence series decreasing", strictly_decreasing(&devs)),
        ];
        Ok(JobOutcome { checks, data: json!({}), series })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FractionalParams {
    s: f64,
    extent: f64,
    bump_radius: f64,
    wavenumber: f64,
}

impl Default for FractionalParams {
    fn default() -> Self {
        Self { s: 0.5, extent: 128.0, bump_radius: 32.0, wavenumber: 0.3 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FractionalTols {
    ratio_band: f64,
    constant: f64,
}

impl Default for FractionalTols {
    fn default() -> Self {
        Self { ratio_band: 0.1, constant: 1e-4 }
    }
}

struct Fractional;

impl Op for Fractional {
    const MODULE: &'static str = "spectral";
    const NAME: &'static str = "fractional";
    const SUMMARY: &'static str = "fractional Sobolev double sum against A_s ∫|f̂|²|p|^{2s} in d=2; schedule = sites per axis";
    type Params = FractionalParams;
    type Tols = FractionalTols;

    fn default_schedule() -> Vec<f64> {
        vec![128.0, 256.0]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        if !(p.s > 0.0 && p.s < 1.0) {
            return Err("s must lie in (0, 1)".into());
        }
        for n in sizes(schedule, "sites")? {
            check_grid(2, n, p.extent / n as f64, 0.0)?;
        }
        Ok(())
    }

    fn cost(_: &Self::Params, schedule: &[f64]) -> Cost {
        Cost::grid(2, sites_of(schedule).into_iter().max().unwrap_or(0))
    }

    fn run(p: &Self::Params, t: &Self::Tols, schedule: &[f64], _: u64) -> Result<JobOutcome> {
        let constant_err = (fractional_constant(1, 0.5)? - TAU).abs();
        let mut series = Series::new(&["sites", "spacing", "lhs", "rhs", "ratio"]);
        let mut ratios = vec![];
        for n in sites_of(schedule) {
            let g = LatticeGrid::new(2, n, p.extent / n as f64, 0.0)?;
            let f = LatticeField::from_fn(&g, |x| radial_bump(x, p.bump_radius) * (p.wavenumber * x[0]).cos());
            let rep = fractional_identity(&f, p.s)?;
            ratios.push(rep.ratio());
            series.push(vec![n as f64, g.spacing(), rep.lhs, rep.rhs, rep.ratio()]);
        }
        let mut checks = vec![
            Check::below("|A_1/2 - 2π| in d=1", constant_err, t.constant),
            Check::within("ratio at the coarsest grid", ratios[0], 1.0 - t.ratio_band, 1.0 + t.ratio_band),
        ];
        let dist: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
        if dist.len() > 1 {
            checks.push(Check::holds("ratio approaches 1 under refinement", strictly_decreasing(&dist)));
        }
        Ok(JobOutcome { checks, data: json!({ "ratios": ratios }), series })
    }
}

// ---------------------------------------------------------------- em_space

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EmStructureParams {
    samples: usize,
}

impl Default for EmStructureParams {
    fn default() -> Self {
        Self { samples: 5 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EmStructureTols {
    gauge: f64,
    two_form: f64,
}

impl Default for EmStructureTols {
    fn default() -> Self {
        Self { gauge: 1e-10, two_form: 1e-10 }
    }
}

struct EmStructure;

impl Op for EmStructure {
    const MODULE: &'static str = "em_space";
    const NAME: &'static str = "structure";
    const SUMMARY: &'static str = "gauge invariance of forms and supports, two-form norm agreement (d = 2, 3)";
    type Params = EmStructureParams;
    type Tols = EmStructureTols;

    fn default_schedule() -> Vec<f64> {
        vec![]
    }

    fn validate(p: &Self::Params, _: &[f64]) -> std::result::Result<(), String> {
        if p.samples == 0 {
            return Err("samples must be positive".into());
        }
        Ok(())
    }

    fn cost(_: &Self::Params, _: &[f64]) -> Cost {
        Cost::grid(2, 16).max(Cost::grid(3, 8))
    }

    fn run(p: &Self::Params, t: &Self::Tols, _: &[f64], seed: u64) -> Result<JobOutcome> {
        let mut series = Series::new(&["dim", "sample", "gauge_drift", "two_form_disagreement"]);
        let mut gauge: f64 = 0.0;
        let mut two_form: f64 = 0.0;
        let mut support_ok = true;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (d, n, a) in [(2usize, 16usize, 0.5), (3, 8, 1.0)] {
            let g = LatticeGrid::new(d, n, a, 0.0)?;
            for s in 0..p.samples {
                let u = random_em_datum(&g, rng.gen())?;
                let v = random_em_datum(&g, rng.gen())?;
                let ug = u.gauge_shifted(&mean_free(&g, &mut rng)?)?;
                let scale = em_inner(&u, &u)? + em_inner(&v, &v)?;
                let drift = ((em_inner(&ug, &v)? - em_inner(&u, &v)?).abs() / scale)
                    .max((em_symplectic(&ug, &v)? - em_symplectic(&u, &v)?).abs() / scale);
                let tf = two_form_norms(&u)?.relative_disagreement();
                support_ok &= gauge_class_support(&ug) == gauge_class_support(&u);
                gauge = gauge.max(drift);
                two_form = two_form.max(tf);
                series.push(vec![d as f64, s as f64, drift, tf]);
            }
        }
        let checks = vec![
            Check::below("gauge drift of inner product and symplectic form", gauge, t.gauge),
            Check::holds("gauge class support is gauge invariant", support_ok),
            Check::below("two-form norm disagreement", two_form, t.two_form),
        ];
        Ok(JobOutcome { checks, data: json!({}), series })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EmDualityParams {
    dim: usize,
    spacing: f64,
    ambient_half_width: f64,
    region_radius: f64,
}

impl Default for EmDualityParams {
    fn default() -> Self {
        Self { dim: 2, spacing: 1.0, ambient_half_width: 7.5, region_radius: 4.0 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EmGapTols {
    gap: f64,
}

impl Default for EmGapTols {
    fn default() -> Self {
        Self { gap: 1e-6 }
    }
}

struct EmDuality;

impl Op for EmDuality {
    const MODULE: &'static str = "em_space";
    const NAME: &'static str = "duality";
    const SUMMARY: &'static str = "EM relative duality of a ball inside a cube; schedule = sites per axis";
    type Params = EmDualityParams;
    type Tols = EmGapTols;

    fn default_schedule() -> Vec<f64> {
        vec![16.0, 32.0]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        if !(p.dim == 2 || p.dim == 3) {
            return Err("EM jobs need dim 2 or 3".into());
        }
        for n in sizes(schedule, "sites")? {
            check_grid(p.dim, n, p.spacing, 0.0)?;
        }
        Ok(())
    }

    fn cost(p: &Self::Params, schedule: &[f64]) -> Cost {
        let n = sites_of(schedule).into_iter().max().unwrap_or(0);
        Cost {
            dense_dim: 2 * p.dim * cube_sites(p.dim, p.ambient_half_width, p.spacing),
            ..Cost::grid(p.dim, n)
        }
    }

    fn run(p: &Self::Params, t: &Self::Tols, schedule: &[f64], _: u64) -> Result<JobOutcome> {
        let centre = vec![0.0; p.dim];
        let mut series = Series::new(&["sites", "region_dim", "complement_dim", "radical_dim", "gap_forward", "gap_dual"]);
        let mut checks = vec![];
        for n in sites_of(schedule) {
            let g = LatticeGrid::new(p.dim, n, p.spacing, 0.0)?;
            let b = SiteSet::ball(&g, &centre, p.region_radius);
            let m = SiteSet::cube(&g, &centre, p.ambient_half_width);
            let rep = em_duality_check(&g, &b, &m, Tolerances::default())?;
            checks.push(Check::below(format!("gap_forward N={n}"), rep.gap_forward, t.gap));
            checks.push(Check::below(format!("gap_dual N={n}"), rep.gap_dual, t.gap));
            series.push(vec![
                n as f64,
                rep.region_dim as f64,
                rep.complement_dim as f64,
                rep.radical_dim as f64,
                rep.gap_forward,
                rep.gap_dual,
            ]);
        }
        Ok(JobOutcome { checks, data: json!({}), series })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BoostParams {
    sites: usize,
    spacing: f64,
    t_scale: f64,
    directions: Vec<Vec<f64>>,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            sites: 32,
            spacing: 1.0,
            t_scale: 16.0,
            directions: vec![vec![1.0, 0.0], vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]],
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BoostTols {
    gap: f64,
    remainder: f64,
}

impl Default for BoostTols {
    fn default() -> Self {
        Self { gap: 1e-6, remainder: 1e-6 }
    }
}

struct BoostRegion;

impl Op for BoostRegion {
    const MODULE: &'static str = "em_space";
    const NAME: &'static str = "boost-region";
    const SUMMARY: &'static str = "conformal-image boost-region masks, EM duality and χ split in d=2; schedule = ε values";
    type Params = BoostParams;
    type Tols = BoostTols;

    fn default_schedule() -> Vec<f64> {
        vec![0.1, 0.5, 0.9]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        if schedule.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err("ε must lie in (0, 1)".into());
        }
        if p.directions.is_empty() || p.directions.iter().any(|v| v.len() != 2) {
            return Err("directions must be non-empty two-vectors".into());
        }
        ConformalMap::new(p.t_scale).map_err(|e| e.to_string())?;
        check_grid(2, p.sites, p.spacing, 0.0)
    }

    fn cost(p: &Self::Params, _: &[f64]) -> Cost {
        Cost {
            dense_dim: 4 * cube_sites(2, p.t_scale / 2.0, p.spacing),
            ..Cost::grid(2, p.sites)
        }
    }

    fn run(p: &Self::Params, t: &Self::Tols, schedule: &[f64], _: u64) -> Result<JobOutcome> {
        let g = LatticeGrid::new(2, p.sites, p.spacing, 0.0)?;
        let map = ConformalMap::new(p.t_scale)?;
        let mut series = Series::new(&["v0", "v1", "epsilon", "mask_sites", "gap_forward", "gap_dual", "chi_remainder", "chi_norm_estimate"]);
        let mut checks = vec![];
        for v in &p.directions {
            for &eps in schedule {
                let rep = boost_region_duality(&g, &map, v, eps, Tolerances::default())?;
                let tag = format!("v=({:.3},{:.3}) ε={eps}", v[0], v[1]);
                checks.push(Check::holds(format!("non-empty mask {tag}"), rep.mask_sites > 0));
                checks.push(Check::below(format!("gap {tag}"), rep.duality.gap_forward.max(rep.duality.gap_dual), t.gap));
                checks.push(Check::below(format!("χ remainder {tag}"), rep.chi_remainder, t.remainder));
                checks.push(Check::holds(format!("χ support {tag}"), rep.chi_support_ok));
                series.push(vec![
                    v[0],
                    v[1],
                    eps,
                    rep.mask_sites as f64,
                    rep.duality.gap_forward,
                    rep.duality.gap_dual,
                    rep.chi_remainder,
                    rep.chi_norm_estimate,
                ]);
            }
        }
        Ok(JobOutcome { checks, data: json!({}), series })
    }
}

// ---------------------------------------------------------------- fock

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CcrParams {
    vacuum_cutoff: usize,
    phase_cutoff: usize,
    samples: usize,
    amplitude: f64,
}

impl Default for CcrParams {
    fn default() -> Self {
        Self { vacuum_cutoff: 12, phase_cutoff: 14, samples: 5, amplitude: 0.5 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CcrTols {
    vacuum: f64,
    phase: f64,
}

impl Default for CcrTols {
    fn default() -> Self {
        Self { vacuum: 1e-6, phase: 1e-5 }
    }
}

struct FockCcr;

fn sample_mode(rng: &mut ChaCha8Rng, amp: f64) -> [Complex64; 1] {
    [Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp))]
}

impl Op for FockCcr {
    const MODULE: &'static str = "fock";
    const NAME: &'static str = "ccr";
    const SUMMARY: &'static str = "vacuum Weyl expectations, Weyl relation and commutator phase on one mode; schedule = cutoffs K";
    type Params = CcrParams;
    type Tols = CcrTols;

    fn default_schedule() -> Vec<f64> {
        vec![6.0, 8.0, 10.0, 12.0, 14.0, 16.0]
    }

    fn validate(p: &Self::Params, schedule: &[f64]) -> std::result::Result<(), String> {
        sizes(schedule, "cutoff")?;
        if p.samples == 0 || !(p.amplitude > 0.0) || p.vacuum_cutoff == 0 || p.phase_cutoff == 0 {
            return Err("samples, amplitude and cutoffs must be positive".into());
        }
        Ok(())
    }

    fn cost(_: &Self::Params, _: &[f64]) -> Cost {
        Cost::default()
    }

    fn run(p: &Self::Params, t: &Self::Tols, schedule: &[f64], seed: u64) -> Result<JobOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctx = FockContext::new(1, p.vacuum_cutoff)?;
        let mut vacuum: f64 = 0.0;
        for _ in 0..p.samples {
            let f = sample_mode(&mut rng, p.amplitude);
            let expected = (-0.5 * one_particle_norm(&f).powi(2)).exp();
            vacuum = vacuum.max((ctx.vacuum_expectation(&ctx.weyl(&f)?) - Complex64::new(expected, 0.0)).norm());
        }
        let (f, g) = (sample_mode(&mut rng, p.amplitude), sample_mode(&mut rng, p.amplitude));
        let mut series = Series::new(&["cutoff", "weyl_relation_residual"]);
        let mut residuals = vec![];
        for k in sites_of(schedule) {
            let r = FockContext::new(1, k)?.weyl_relation_residual(&f, &g)?;
            residuals.push(r);
            series.push(vec![k as f64, r]);
        }
        let ctx = FockContext::new(1, p.phase_cutoff)?;
        let s = FRAC_PI_2.sqrt();
        let mut phase = ctx
            .commutation_vs_symplectic(&[Complex64::new(s, 0.0)], &[Complex64::new(0.0, s)])?
            .disagreement();
        for _ in 0..p.samples {
            let (f, g) = (sample_mode(&mut rng, p.amplitude), sample_mode(&mut rng, p.amplitude));
            phase = phase.max(ctx.commutation_vs_symplectic(&f, &g)?.disagreement());
        }
        let checks = vec![
            Check::below("vacuum expectation error", vacuum, t.vacuum),
            Check::holds("Weyl residual non-increasing in K", residuals.windows(2).all(|w| w[1] <= w[0])),
            Check::below("commutator phase disagreement", phase, t.phase),
        ];
        Ok(JobOutcome { checks, data: json!({ "residuals": residuals }), series })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CommutantParams {
    cutoff: usize,
    step: f64,
}

impl Default for CommutantParams {
    fn default() -> Self {
        Self { cutoff: 10, step: 0.5 }
    }
}

struct FockCommutant;

impl Op for FockCommutant {
    const MODULE: &'static str = "fock";
    const NAME: &'static str = "commutant";
    const SUMMARY: &'static str = "relative commutant dimension against the symplectic complement, n = 1 worked cases";
    type Params = CommutantParams;
    type Tols = NoTols;

    fn default_schedule() -> Vec<f64> {
        vec![]
    }

    fn validate(p: &Self::Params, _: &[f64]) -> std::result::Result<(), String> {
        if p.cutoff == 0 || !(p.step > 0.0) {
            return Err("cutoff and step must be positive".into());
        }
        Ok(())
    }

    fn cost(_: &Self::Params, _: &[f64]) -> Cost {
        Cost::default()
    }

    fn run(p: &Self::Params, _: &Self::Tols, _: &[f64], _: u64) -> Result<JobOutcome> {
        let ctx = FockContext::new(1, p.cutoff)?;
        let h = RealSubspace::full(1);
        let line = RealSubspace::new(1, vec![vec![Complex64::new(1.0, 0.0)]])?;
        let mut series = Series::new(&["v_dim", "commutant_dim", "complement_dim", "difference"]);
        let mut checks = vec![];
        for v in [&line, &h] {
            let rep = relative_commutant_dims(&ctx, v, &h, p.step)?;
            checks.push(Check::holds(format!("dimensions agree for dim V = {}", v.dim()), rep.difference == 0));
            series.push(vec![v.dim() as f64, rep.commutant_dim as f64, rep.complement_dim as f64, rep.difference as f64]);
        }
        Ok(JobOutcome { checks, data: json!({}), series })
    }
}

// ---------------------------------------------------------------- geometry

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ProbeParams {
    probes: usize,
    region_center: Vec<f64>,
    region_radius: f64,
    ambient_radius: f64,
    sample_extent: f64,
    samples_per_axis: usize,
}

impl Default for ProbeParams {
    fn default() -> Self {
        Self {
            probes: 10_000,
            region_center: vec![0.3, -0.2],
            region_radius: 0.8,
            ambient_radius: 2.0,
            sample_extent: 1.2,
            samples_per_axis: 61,
        }
    }
}

struct ComplementProbes;

impl Op for ComplementProbes {
    const MODULE: &'static str = "geometry";
    const NAME: &'static str = "complement-probes";
    const SUMMARY: &'static str = "relative causal complement as a set complement against the spacelike predicate";
    type Params = ProbeParams;
    type Tols = NoTols;

    fn default_schedule() -> Vec<f64> {
        vec![]
    }

    fn validate(p: &Self::Params, _: &[f64]) -> std::result::Result<(), String> {
        if p.region_center.len() != 2 || p.samples_per_axis < 3 || p.probes == 0 {
            return Err("need a two-dimensional centre, at least 3 samples per axis and probes".into());
        }
        if !(p.region_radius > 0.0 && p.ambient_radius > p.region_radius && p.sample_extent >= p.region_radius) {
            return Err("need 0 < region_radius <= sample_extent and region_radius < ambient_radius".into());
        }
        Ok(())
    }

    fn cost(_: &Self::Params, _: &[f64]) -> Cost {
        Cost::default()
    }

    fn run(p: &Self::Params, _: &Self::Tols, _: &[f64], seed: u64) -> Result<JobOutcome> {
        let s = Surface::FlatTimeSlice { t0: 0.0 };
        let r = Region::diamond(s, Base::ball(p.region_center.clone(), p.region_radius));
        let m = Region::diamond(s, Base::ball(vec![0.0, 0.0], p.ambient_radius));
        let rc = causal_complement(&r, &m)?;
        let patch = r.as_patch().expect("diamonds have patches");
        let samples = patch.sample_points(2, p.sample_extent, p.samples_per_axis)?;
        let h = 4.0 * p.sample_extent / (p.samples_per_axis - 1) as f64;
        let box_half = p.ambient_radius;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut checked, mut skipped, mut mismatches, mut inside) = (0usize, 0usize, 0usize, 0usize);
        while checked < p.probes {
            let x = Point::new((0..3).map(|_| rng.gen_range(-box_half..box_half)).collect())?;
            if rc.margin(&x).abs() < h || unresolved(&patch, &x, h) {
                skipped += 1;
                continue;
            }
            checked += 1;
            let member = rc.contains(&x);
            inside += member as usize;
            if member != spacelike_to_all(&m, &samples, &x) {
                mismatches += 1;
            }
        }
        let checks = vec![Check::holds("set complement equals spacelike predicate", mismatches == 0)];
        let mut series = Series::new(&["checked", "skipped", "inside", "mismatches"]);
        series.push(vec![checked as f64, skipped as f64, inside as f64, mismatches as f64]);
        Ok(JobOutcome { checks, data: json!({ "resolution": h }), series })
    }
}

/// Probes whose base distance is within `h` of their time offset are not resolved by a
/// sample grid of spacing `h`.
fn unresolved(patch: &SurfacePatch, x: &Point, h: f64) -> bool {
    match patch.chart(x) {
        Some((tau, y)) => {
            let dist = (-patch.base.clearance(&y, &patch.surface)).max(0.0);
            (dist - tau.abs()).abs() < h
        }
        None => false,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConformalParams {
    t_scale: f64,
    samples: usize,
}

impl Default for ConformalParams {
    fn default() -> Self {
        Self { t_scale: 1.0, samples: 1000 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExactTols {
    exact: f64,
}

impl Default for ExactTols {
    fn default() -> Self {
        Self { exact: 1e-12 }
    }
}

struct Conformal;

impl Op for Conformal {
    const MODULE: &'static str = "geometry";
    const NAME: &'static str = "conformal";
    const SUMMARY: &'static str = "ray-inversion involution and images of the cone vertex and hyperboloid";
    type Params = ConformalParams;
    type Tols = ExactTols;

    fn default_schedule() -> Vec<f64> {
        vec![]
    }

    fn validate(p: &Self::Params, _: &[f64]) -> std::result::Result<(), String> {
        if p.samples == 0 {
            return Err("samples must be positive".into());
        }
        ConformalMap::new(p.t_scale).map(|_| ()).map_err(|e| e.to_string())
    }

    fn cost(_: &Self::Params, _: &[f64]) -> Cost {
        Cost::default()
    }

    fn run(p: &Self::Params, t: &Self::Tols, _: &[f64], seed: u64) -> Result<JobOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut involution: f64 = 0.0;
        for _ in 0..p.samples {
            let x = Point::new((0..3).map(|_| rng.gen_range(-3.0..3.0)).collect())?;
            if x.minkowski_sq().abs() < 1e-3 {
                continue;
            }
            let back = ray_inversion(&ray_inversion(&x)?)?;
            involution = involution.max(back.sub(&x)?.euclidean_sq().sqrt() / (1.0 + x.euclidean_sq().sqrt()));
        }
        let map = ConformalMap::new(p.t_scale)?;
        let vertex = map.forward(&Point::new(vec![0.0; 3])?)?;
        let vertex_err = vertex.sub(&Point::new(vec![-p.t_scale, 0.0, 0.0])?)?.euclidean_sq().sqrt();
        let mut hyperboloid: f64 = 0.0;
        for k in 0..p.samples {
            let eta = 5.0 * k as f64 / p.samples as f64;
            let angle: f64 = rng.gen_range(0.0..TAU);
            let z = map.forward(&map.hyperboloid_point(eta, &[angle.cos(), angle.sin()]))?;
            let radius = z.space().iter().map(|v| v * v).sum::<f64>().sqrt();
            hyperboloid = hyperboloid
                .max((z.time() - map.basis_time()).abs())
                .max((radius - map.basis_radius() * (eta / 2.0).tanh()).abs());
        }
        let checks = vec![
            Check::below("ray inversion involution", involution, t.exact),
            Check::below("cone vertex image", vertex_err, t.exact),
            Check::below("hyperboloid image on the basis ball", hyperboloid, t.exact),
        ];
        let mut series = Series::new(&["involution", "vertex", "hyperboloid"]);
        series.push(vec![involution, vertex_err, hyperboloid]);
        Ok(JobOutcome { checks, data: json!({}), series })
    }
}
