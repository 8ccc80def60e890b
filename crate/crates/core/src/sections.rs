//! Sections S(x₀, p, t) = { y : D(y; x₀, p) < t } as geometric objects.
//!
//! Along any ray from x₀ the gap is convex, zero at the origin and
//! nonnegative, hence nondecreasing, so the boundary radius is found by
//! geometric bracketing followed by bisection. Rays not bracketed below the
//! cap are classified as unbounded.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{axpy, FunctionSpec, Interval, Point, SubgradientPair};
use crate::sampling::{self, SamplerConfig, Stream};

pub const DEFAULT_R_CAP: f64 = 1e12;
/// Bisection stop width: absolute for radii of at least 1, relative below.
pub const BISECTION_ABS_TOL: f64 = 1e-12;
pub const BISECTION_MAX_ITERS: usize = 60;
const MIN_RADIUS: f64 = 1e-300;
/// Near-boundary samples are placed on the level set of this fraction of
/// the height, which keeps their gap within [(1 − 10⁻³)t, t).
pub const NEAR_BOUNDARY_LEVEL: f64 = 1.0 - 5e-4;

fn check_height(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidHeight(t))
    }
}

fn check_dims(f: &FunctionSpec, vs: &[&[f64]]) -> Result<()> {
    for v in vs {
        if v.len() != f.dimension() {
            return Err(Error::DimensionMismatch {
                expected: f.dimension(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// Strict membership: D(y; x₀, p) < t.
pub fn contains(f: &FunctionSpec, x0: &[f64], p: &[f64], t: f64, y: &[f64]) -> Result<bool> {
    check_height(t)?;
    check_dims(f, &[x0, p, y])?;
    Ok(f.gap(x0, p, y) < t)
}

pub(crate) fn ray_radius(f: &FunctionSpec, x0: &[f64], p: &[f64], t: f64, dir: &[f64], r_cap: f64) -> f64 {
    let below = |r: f64| f.gap(x0, p, &axpy(x0, r, dir)) < t;
    let mut hi = 1.0;
    if below(hi) {
        while below(hi) {
            hi *= 2.0;
            if hi > r_cap {
                return f64::INFINITY;
            }
        }
    } else {
        while !below(0.5 * hi) && hi > MIN_RADIUS {
            hi *= 0.5;
        }
    }
    // the bracket is [r, 2r] from here on
    let mut lo = 0.5 * hi;
    let tol = BISECTION_ABS_TOL * lo.min(1.0);
    for _ in 0..BISECTION_MAX_ITERS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Distance from x₀ to the section boundary along a unit direction, or
/// `+∞` when the ray is cap-classified as unbounded.
pub fn boundary_radius(
    f: &FunctionSpec,
    x0: &[f64],
    p: &[f64],
    t: f64,
    direction: &[f64],
) -> Result<f64> {
    boundary_radius_with_cap(f, x0, p, t, direction, DEFAULT_R_CAP)
}

pub fn boundary_radius_with_cap(
    f: &FunctionSpec,
    x0: &[f64],
    p: &[f64],
    t: f64,
    direction: &[f64],
    r_cap: f64,
) -> Result<f64> {
    check_height(t)?;
    check_dims(f, &[x0, p, direction])?;
    let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("direction must be a unit vector".into()));
    }
    Ok(ray_radius(f, x0, p, t, direction, r_cap))
}

/// The open interval S(x₀, p, t) of a one-dimensional function.
pub fn solve_interval_1d(f: &FunctionSpec, x0: f64, p: f64, t: f64) -> Result<Interval> {
    solve_interval_1d_with_cap(f, x0, p, t, DEFAULT_R_CAP)
}

pub fn solve_interval_1d_with_cap(
    f: &FunctionSpec,
    x0: f64,
    p: f64,
    t: f64,
    r_cap: f64,
) -> Result<Interval> {
    if f.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: f.dimension(),
        });
    }
    check_height(t)?;
    let right = ray_radius(f, &[x0], &[p], t, &[1.0], r_cap);
    let left = ray_radius(f, &[x0], &[p], t, &[-1.0], r_cap);
    Ok(Interval {
        lo: x0 - left,
        hi: x0 + right,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub direction: Point,
    #[serde(with = "crate::report::ext_real")]
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Interval1d(Interval),
    RadialBoundary(Vec<Ray>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub base: SubgradientPair,
    pub height: f64,
    pub geometry: Geometry,
}

impl Section {
    pub fn interval(f: &FunctionSpec, base: SubgradientPair, t: f64, r_cap: f64) -> Result<Self> {
        check_dims(f, &[&base.point, &base.slope])?;
        let iv = solve_interval_1d_with_cap(f, base.point[0], base.slope[0], t, r_cap)?;
        Ok(Section {
            base,
            height: t,
            geometry: Geometry::Interval1d(iv),
        })
    }

    pub fn radial(
        f: &FunctionSpec,
        base: SubgradientPair,
        t: f64,
        directions: &[Point],
        r_cap: f64,
    ) -> Result<Self> {
        check_dims(f, &[&base.point, &base.slope])?;
        let rays = directions
            .iter()
            .map(|d| {
                let radius = boundary_radius_with_cap(f, &base.point, &base.slope, t, d, r_cap)?;
                Ok(Ray {
                    direction: d.clone(),
                    radius,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Section {
            base,
            height: t,
            geometry: Geometry::RadialBoundary(rays),
        })
    }

    pub fn contains(&self, f: &FunctionSpec, y: &[f64]) -> Result<bool> {
        contains(f, &self.base.point, &self.base.slope, self.height, y)
    }

    /// True when some ray (or interval end) was cap-classified.
    pub fn has_unbounded_ray(&self) -> bool {
        match &self.geometry {
            Geometry::Interval1d(iv) => iv.lo.is_infinite() || iv.hi.is_infinite(),
            Geometry::RadialBoundary(rays) => rays.iter().any(|r| r.radius.is_infinite()),
        }
    }

    pub fn all_rays_unbounded(&self) -> bool {
        match &self.geometry {
            Geometry::Interval1d(iv) => iv.lo.is_infinite() && iv.hi.is_infinite(),
            Geometry::RadialBoundary(rays) => rays.iter().all(|r| r.radius.is_infinite()),
        }
    }
}

/// `count` unit directions evenly spaced on the circle, starting at angle 0.
pub fn directions_2d(count: usize) -> Vec<Point> {
    (0..count)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / count as f64;
            vec![a.cos(), a.sin()]
        })
        .collect()
}

/// Draws one member of S(x₀, p, t) along a random direction: on the
/// near-boundary level set, or at a uniform fraction of the radius.
/// Unbounded rays get a log-uniform radius up to the cap; the flag reports
/// whether the ray was cap-classified.
pub(crate) fn sample_member<R: Rng>(
    f: &FunctionSpec,
    x0: &[f64],
    p: &[f64],
    t: f64,
    r_cap: f64,
    near_boundary: bool,
    rng: &mut R,
) -> Option<(Point, bool)> {
    let dir = sampling::unit_direction(rng, f.dimension());
    let r = ray_radius(f, x0, p, t, &dir, r_cap);
    let radius = if r.is_infinite() {
        sampling::log_uniform(rng, 1e-3, r_cap)
    } else if near_boundary {
        ray_radius(f, x0, p, NEAR_BOUNDARY_LEVEL * t, &dir, r_cap)
    } else {
        r * rng.gen_range(0.0..1.0)
    };
    let y = axpy(x0, radius, &dir);
    (f.gap(x0, p, &y) < t).then_some((y, r.is_infinite()))
}

/// Members of S(x₀, p, t): for each of `sampler.z_per_triple` random
/// directions, one near-boundary point (finite radius) and one interior
/// point.
pub fn sample_section(
    f: &FunctionSpec,
    x0: &[f64],
    p: &[f64],
    t: f64,
    sampler: &SamplerConfig,
) -> Result<Vec<Point>> {
    check_height(t)?;
    check_dims(f, &[x0, p])?;
    let mut rng = sampling::task_rng(sampler.seed, Stream::Sections, 0);
    let mut out = Vec::new();
    for _ in 0..sampler.z_per_triple {
        for near in [true, false] {
            if let Some((y, _)) = sample_member(f, x0, p, t, sampler.r_cap, near, &mut rng) {
                out.push(y);
            }
        }
    }
    Ok(out)
}
