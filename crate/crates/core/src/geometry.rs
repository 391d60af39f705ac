//! Causal geometry of Minkowski space `ℝ^{d+1}` with signature `(+, -, …, -)`.
//!
//! Regions are open sets given by exact predicates. Diamonds over a base on a Cauchy
//! surface are tested through the clearance of the base: on a flat slice `t = t0`,
//! `x ∈ D(B)` iff the spatial distance from `x` to `Σ ∖ B` exceeds `|t - t0|`.
//! Hyperboloid bases are described in the flat chart obtained from the conformal map
//! that sends `V+` onto the double cone `O₁` and the hyperboloid onto the flat ball `B₁`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for lightlike classification and boundary resolution.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidParameter(
                "a spacetime point needs time and at least one space coordinate".into(),
            ));
        }
        Ok(Self { coords })
    }

    pub fn from_parts(t: f64, space: &[f64]) -> Self {
        let mut coords = Vec::with_capacity(space.len() + 1);
        coords.push(t);
        coords.extend_from_slice(space);
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn time(&self) -> f64 {
        self.coords[0]
    }

    pub fn space(&self) -> &[f64] {
        &self.coords[1..]
    }

    pub fn spatial_dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn sub(&self, other: &Point) -> Result<Point> {
        check_dims(self, other)?;
        Ok(Point {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &Point) -> Result<Point> {
        check_dims(self, other)?;
        Ok(Point {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Point {
        Point {
            coords: self.coords.iter().map(|c| c * s).collect(),
        }
    }

    /// Minkowski square `x0² - |x|²`.
    pub fn minkowski_sq(&self) -> f64 {
        self.time() * self.time() - norm_sq(self.space())
    }

    /// Euclidean square `x0² + |x|²`, the scale for relative tolerances.
    pub fn euclidean_sq(&self) -> f64 {
        norm_sq(&self.coords)
    }
}

fn check_dims(x: &Point, y: &Point) -> Result<()> {
    if x.coords.len() != y.coords.len() {
        return Err(Error::DimensionMismatch {
            expected: x.coords.len(),
            found: y.coords.len(),
        });
    }
    Ok(())
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Timelike,
    Lightlike,
    Spacelike,
}

pub fn interval_kind(x: &Point, y: &Point) -> Result<IntervalKind> {
    interval_kind_with_tolerance(x, y, DEFAULT_TOLERANCE)
}

pub fn interval_kind_with_tolerance(x: &Point, y: &Point, tol: f64) -> Result<IntervalKind> {
    let dx = x.sub(y)?;
    let q = dx.minkowski_sq();
    Ok(if q.abs() <= tol * dx.euclidean_sq() {
        IntervalKind::Lightlike
    } else if q > 0.0 {
        IntervalKind::Timelike
    } else {
        IntervalKind::Spacelike
    })
}

/// `x ↦ -x/x²`.
pub fn ray_inversion(x: &Point) -> Result<Point> {
    let q = x.minkowski_sq();
    if q.abs() <= DEFAULT_TOLERANCE * x.euclidean_sq() {
        return Err(Error::NullVector);
    }
    Ok(x.scaled(-1.0 / q))
}

/// `φ(x) = φ0(x + e0/T)`: maps `V+` onto the double cone with vertices `(-T, 0)` and `0`,
/// and the hyperboloid `x² = c²`, `c = 1/T`, onto the ball of radius `T/2` on `t = -T/2`.
/// The apex of `V+` goes to the lower vertex and future timelike infinity to the upper one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalMap {
    t_scale: f64,
}

impl ConformalMap {
    pub fn new(t_scale: f64) -> Result<Self> {
        if !(t_scale > 0.0 && t_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be positive, got {t_scale}")));
        }
        Ok(Self { t_scale })
    }

    pub fn for_hyperboloid(c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
        }
        Self::new(1.0 / c)
    }

    pub fn t_scale(&self) -> f64 {
        self.t_scale
    }

    pub fn hyperboloid_parameter(&self) -> f64 {
        1.0 / self.t_scale
    }

    pub fn basis_time(&self) -> f64 {
        -self.t_scale / 2.0
    }

    pub fn basis_radius(&self) -> f64 {
        self.t_scale / 2.0
    }

    /// Double cone `O₁` for `d` space dimensions.
    pub fn image_region(&self, d: usize) -> Region {
        Region::DoubleCone {
            lower: Point::from_parts(-self.t_scale, &vec![0.0; d]),
            upper: Point::from_parts(0.0, &vec![0.0; d]),
        }
    }

    pub fn forward(&self, x: &Point) -> Result<Point> {
        let mut y = x.clone();
        y.coords[0] += 1.0 / self.t_scale;
        ray_inversion(&y)
    }

    pub fn inverse(&self, z: &Point) -> Result<Point> {
        let mut y = ray_inversion(z)?;
        y.coords[0] -= 1.0 / self.t_scale;
        Ok(y)
    }

    /// Hyperboloid point with rapidity `eta` in direction `u`.
    pub fn hyperboloid_point(&self, eta: f64, u: &[f64]) -> Point {
        let c = self.hyperboloid_parameter();
        let s = c * eta.sinh();
        Point::from_parts(c * eta.cosh(), &u.iter().map(|x| x * s).collect::<Vec<_>>())
    }
}

/// Cubic cells of side `spacing` centred at `spacing · k` for the listed integer sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteMask {
    pub spacing: f64,
    pub sites: Vec<Vec<i64>>,
}

impl SiteMask {
    fn lookup(&self) -> HashSet<&[i64]> {
        self.sites.iter().map(|s| s.as_slice()).collect()
    }

    fn cube_distance(&self, y: &[f64], site: &[i64]) -> f64 {
        let h = self.spacing / 2.0;
        y.iter()
            .zip(site)
            .map(|(&yi, &k)| {
                let e = (yi - self.spacing * k as f64).abs() - h;
                if e > 0.0 {
                    e * e
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            .sqrt()
    }

    fn clearance(&self, y: &[f64]) -> f64 {
        let set = self.lookup();
        let home: Vec<i64> = y.iter().map(|v| (v / self.spacing).round() as i64).collect();
        let outside = self
            .sites
            .iter()
            .map(|s| self.cube_distance(y, s))
            .fold(f64::INFINITY, f64::min);
        if outside > 0.0 || !set.contains(home.as_slice()) {
            return -outside;
        }
        // Inside: distance to the nearest cell outside the mask, searched in growing shells.
        let d = y.len();
        let mut best = f64::INFINITY;
        for r in 1i64.. {
            if (r - 1) as f64 * self.spacing >= best {
                break;
            }
            let side = 2 * r + 1;
            let mut offset = vec![0i64; d];
            for idx in 0..side.pow(d as u32) {
                let mut rem = idx;
                let mut on_shell = false;
                for o in offset.iter_mut() {
                    *o = rem % side - r;
                    rem /= side;
                    on_shell |= o.abs() == r;
                }
                if !on_shell {
                    continue;
                }
                let cell: Vec<i64> = home.iter().zip(&offset).map(|(a, b)| a + b).collect();
                if !set.contains(cell.as_slice()) {
                    best = best.min(self.cube_distance(y, &cell));
                }
            }
        }
        best
    }
}

/// Base sets on a Cauchy surface, in surface coordinates (spatial coordinates for a
/// flat slice, chart coordinates of the flat ball `B₁` for a hyperboloid).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Base {
    Ball { center: Vec<f64>, radius: f64 },
    /// Rapidity cap `{c(cosh η, sinh η u) : η > 0, (u, v) > 1 - ε}` on a hyperboloid.
    BoostCap { direction: Vec<f64>, epsilon: f64 },
    Complement { base: Box<Base> },
    Intersection { bases: Vec<Base> },
    Union { bases: Vec<Base> },
    FullSurface,
    Empty,
    Mask(SiteMask),
}

impl Base {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Base::Ball { center, radius }
    }

    pub fn complement(base: Base) -> Self {
        Base::Complement {
            base: Box::new(base),
        }
    }

    /// Signed distance in surface coordinates: distance to the complement inside, minus
    /// the distance to the set outside. Exact for balls, caps, masks and complements of
    /// these; for intersections and unions only the sign and the interior value are exact.
    pub fn clearance(&self, y: &[f64], surface: &Surface) -> f64 {
        match self {
            Base::Ball { center, radius } => {
                let d: f64 = y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                radius - d.sqrt()
            }
            Base::BoostCap { direction, epsilon } => {
                let r1 = match surface {
                    Surface::HyperboloidBranch { c } => 0.5 / c,
                    Surface::FlatTimeSlice { .. } => return f64::NEG_INFINITY,
                };
                let axis: Vec<f64> = direction.iter().map(|v| -v).collect();
                sector_clearance(y, &axis, (1.0 - epsilon).acos(), r1)
            }
            Base::Complement { base } => -base.clearance(y, surface),
            Base::Intersection { bases } => bases
                .iter()
                .map(|b| b.clearance(y, surface))
                .fold(f64::INFINITY, f64::min),
            Base::Union { bases } => bases
                .iter()
                .map(|b| b.clearance(y, surface))
                .fold(f64::NEG_INFINITY, f64::max),
            Base::FullSurface => match surface {
                Surface::FlatTimeSlice { .. } => f64::INFINITY,
                Surface::HyperboloidBranch { c } => 0.5 / c - norm(y),
            },
            Base::Empty => f64::NEG_INFINITY,
            Base::Mask(m) => m.clearance(y),
        }
    }

    pub fn contains(&self, y: &[f64], surface: &Surface) -> bool {
        self.clearance(y, surface) > DEFAULT_TOLERANCE * (1.0 + norm(y))
    }
}

/// Signed distance to the open set `{y : 0 < |y| < r1, angle(y, axis) < alpha}`,
/// `alpha < π/2`.
fn sector_clearance(y: &[f64], axis: &[f64], alpha: f64, r1: f64) -> f64 {
    let r = norm(y);
    if r == 0.0 {
        return 0.0;
    }
    let cos_t = (dot(y, axis) / r).clamp(-1.0, 1.0);
    let theta = cos_t.acos();
    if theta < alpha && r < r1 {
        return (r1 - r).min(r * (alpha - theta).sin());
    }
    let dist = if theta <= alpha {
        r - r1
    } else if theta >= alpha + std::f64::consts::FRAC_PI_2 {
        r
    } else if r * (theta - alpha).cos() <= r1 {
        r * (theta - alpha).sin()
    } else {
        // Nearest point on the rim, in the plane spanned by the axis and y.
        let along = r * cos_t;
        let perp = r * theta.sin();
        let (ra, rp) = (r1 * alpha.cos(), r1 * alpha.sin());
        ((along - ra).powi(2) + (perp - rp).powi(2)).sqrt()
    };
    -dist
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    FlatTimeSlice { t0: f64 },
    /// `{x : x0 ≥ 0, x² = c²}`.
    HyperboloidBranch { c: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePatch {
    pub surface: Surface,
    pub base: Base,
}

impl SurfacePatch {
    /// Chart coordinates `(τ, y)` of a spacetime point relative to the surface, where the
    /// surface itself is `τ = 0`. `None` outside the chart domain.
    pub fn chart(&self, x: &Point) -> Option<(f64, Vec<f64>)> {
        match self.surface {
            Surface::FlatTimeSlice { t0 } => Some((x.time() - t0, x.space().to_vec())),
            Surface::HyperboloidBranch { c } => {
                if !(x.time() > norm(x.space())) {
                    return None;
                }
                let map = ConformalMap::for_hyperboloid(c).ok()?;
                let z = map.forward(x).ok()?;
                Some((z.time() - map.basis_time(), z.space().to_vec()))
            }
        }
    }

    fn diamond_margin(&self, x: &Point) -> f64 {
        match self.chart(x) {
            Some((tau, y)) => self.base.clearance(&y, &self.surface) - tau.abs(),
            None => f64::NEG_INFINITY,
        }
    }

    /// Points of the closed base embedded in spacetime, on a grid of `per_axis` points per
    /// axis over `[-extent, extent]^d` of surface coordinates.
    pub fn sample_points(&self, d: usize, extent: f64, per_axis: usize) -> Result<Vec<Point>> {
        let step = 2.0 * extent / (per_axis - 1) as f64;
        let mut out = vec![];
        let mut idx = vec![0usize; d];
        loop {
            let y: Vec<f64> = idx.iter().map(|&i| -extent + step * i as f64).collect();
            if self.base.clearance(&y, &self.surface) >= 0.0 {
                match self.surface {
                    Surface::FlatTimeSlice { t0 } => out.push(Point::from_parts(t0, &y)),
                    Surface::HyperboloidBranch { c } => {
                        let map = ConformalMap::for_hyperboloid(c)?;
                        if norm(&y) < map.basis_radius() {
                            out.push(map.inverse(&Point::from_parts(map.basis_time(), &y))?);
                        }
                    }
                }
            }
            let mut k = 0;
            loop {
                if k == d {
                    return Ok(out);
                }
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    ForwardCone { apex: Point },
    DoubleCone { lower: Point, upper: Point },
    DiamondOverBase(SurfacePatch),
    /// Causal completion of a boost cap on the hyperboloid `x² = c²`.
    BoostRegionCompletion { c: f64, direction: Vec<f64>, epsilon: f64 },
}

impl Region {
    pub fn diamond(surface: Surface, base: Base) -> Self {
        Region::DiamondOverBase(SurfacePatch { surface, base })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::ForwardCone { .. } => Ok(()),
            Region::DoubleCone { lower, upper } => {
                let dx = upper.sub(lower)?;
                if !(dx.time() > 0.0)
                    || interval_kind(upper, lower)? != IntervalKind::Timelike
                {
                    return Err(Error::InvalidParameter(
                        "double cone vertices must be timelike with the upper one later".into(),
                    ));
                }
                Ok(())
            }
            Region::DiamondOverBase(p) => validate_base(&p.base, &p.surface),
            Region::BoostRegionCompletion { c, direction, epsilon } => {
                if !(*c > 0.0) {
                    return Err(Error::InvalidParameter("c must be positive".into()));
                }
                validate_cap(direction, *epsilon)
            }
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.margin(x) > DEFAULT_TOLERANCE * (1.0 + x.euclidean_sq().sqrt())
    }

    /// Signed clearance whose positivity is membership.
    pub fn margin(&self, x: &Point) -> f64 {
        match self {
            Region::ForwardCone { apex } => match x.sub(apex) {
                Ok(dx) => dx.time() - norm(dx.space()),
                Err(_) => f64::NEG_INFINITY,
            },
            Region::DoubleCone { lower, upper } => match (x.sub(lower), upper.sub(x)) {
                (Ok(a), Ok(b)) => (a.time() - norm(a.space())).min(b.time() - norm(b.space())),
                _ => f64::NEG_INFINITY,
            },
            Region::DiamondOverBase(p) => p.diamond_margin(x),
            Region::BoostRegionCompletion { .. } => self
                .as_patch()
                .map(|p| p.diamond_margin(x))
                .unwrap_or(f64::NEG_INFINITY),
        }
    }

    /// The region as a diamond over a base, when it is one.
    pub fn as_patch(&self) -> Option<SurfacePatch> {
        match self {
            Region::DiamondOverBase(p) => Some(p.clone()),
            Region::BoostRegionCompletion { c, direction, epsilon } => Some(SurfacePatch {
                surface: Surface::HyperboloidBranch { c: *c },
                base: Base::BoostCap {
                    direction: direction.clone(),
                    epsilon: *epsilon,
                },
            }),
            Region::DoubleCone { lower, upper } => {
                if lower.space() != upper.space() {
                    return None;
                }
                let h = (upper.time() - lower.time()) / 2.0;
                Some(SurfacePatch {
                    surface: Surface::FlatTimeSlice { t0: lower.time() + h },
                    base: Base::ball(lower.space().to_vec(), h),
                })
            }
            Region::ForwardCone { .. } => None,
        }
    }
}

fn validate_cap(direction: &[f64], epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("ε must lie in (0, 1), got {epsilon}")));
    }
    if (norm(direction) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter("cap direction must be a unit vector".into()));
    }
    Ok(())
}

fn validate_base(base: &Base, surface: &Surface) -> Result<()> {
    match base {
        Base::Ball { radius, .. } if !(*radius > 0.0) => {
            Err(Error::InvalidParameter("ball radius must be positive".into()))
        }
        Base::BoostCap { direction, epsilon } => match surface {
            Surface::HyperboloidBranch { .. } => validate_cap(direction, *epsilon),
            Surface::FlatTimeSlice { .. } => Err(Error::Unsupported(
                "boost caps live on hyperboloids".into(),
            )),
        },
        Base::Complement { base } => validate_base(base, surface),
        Base::Intersection { bases } | Base::Union { bases } => {
            bases.iter().try_for_each(|b| validate_base(b, surface))
        }
        Base::Mask(m) if !(m.spacing > 0.0) => {
            Err(Error::InvalidParameter("mask spacing must be positive".into()))
        }
        _ => Ok(()),
    }
}

/// `x = (c cosh η, c sinh η u)` with `η > 0` and `(u, v) > 1 - ε`.
pub fn boost_cap_contains(c: f64, v: &[f64], epsilon: f64, x: &Point) -> Result<bool> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter("c must be positive".into()));
    }
    validate_cap(v, epsilon)?;
    if v.len() != x.spatial_dim() {
        return Err(Error::DimensionMismatch {
            expected: x.spatial_dim(),
            found: v.len(),
        });
    }
    let scale = x.euclidean_sq();
    if x.time() <= 0.0 || (x.minkowski_sq() - c * c).abs() > DEFAULT_TOLERANCE * scale.max(c * c) {
        return Err(Error::Precondition("point is not on the hyperboloid branch".into()));
    }
    let r = norm(x.space());
    if r <= DEFAULT_TOLERANCE * scale.sqrt() {
        return Ok(false);
    }
    Ok(dot(x.space(), v) / r > 1.0 - epsilon)
}

fn ambient_patch(m: &Region, r: &SurfacePatch) -> Result<SurfacePatch> {
    if let Region::ForwardCone { apex } = m {
        if apex.coords().iter().all(|&a| a == 0.0) {
            if let Surface::HyperboloidBranch { .. } = r.surface {
                return Ok(SurfacePatch {
                    surface: r.surface,
                    base: Base::FullSurface,
                });
            }
        }
    }
    m.as_patch()
        .ok_or_else(|| Error::Unsupported("ambient region has no Cauchy-surface base".into()))
}

/// Relative causal complement of a diamond `R = D(Σ, B)` inside an ambient diamond
/// `M = D(Σ, A)` with the same surface, returned as `D(Σ, A ∖ B)`.
pub fn causal_complement(r: &Region, m: &Region) -> Result<Region> {
    r.validate()?;
    m.validate()?;
    let rp = r
        .as_patch()
        .ok_or_else(|| Error::Unsupported("region has no Cauchy-surface base".into()))?;
    let mp = ambient_patch(m, &rp)?;
    if rp.surface != mp.surface {
        return Err(Error::Unsupported(
            "region and ambient must share a Cauchy surface".into(),
        ));
    }
    if rp == mp {
        return Ok(Region::diamond(rp.surface, Base::Empty));
    }
    Ok(Region::diamond(
        rp.surface,
        Base::Intersection {
            bases: vec![mp.base, Base::complement(rp.base)],
        },
    ))
}

/// Predicate form of the relative complement: `x ∈ M` and `x` spacelike to every sample
/// of the region's base.
pub fn spacelike_to_all(m: &Region, samples: &[Point], x: &Point) -> bool {
    m.contains(x)
        && samples
            .iter()
            .all(|y| x.sub(y).map(|d| d.minkowski_sq() < 0.0).unwrap_or(false))
}
