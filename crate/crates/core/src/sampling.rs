//! Sampler configuration and deterministic random streams.
//!
//! Every independent task (one triple, one probe) draws from its own ChaCha
//! stream derived from the master seed and the task index, so serial and
//! parallel runs see exactly the same numbers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Half-width R of the sampling box [−R, R]ⁿ.
    pub box_half_width: f64,
    /// Number of (x, t, y) triples drawn by the engulfing checks.
    pub triples: usize,
    /// Points z drawn per triple in full mode, z = x included.
    pub z_per_triple: usize,
    /// Points per side of the 1D pair grid used by the K estimator.
    pub grid: usize,
    /// Random pairs used by the K estimator in dimension > 1.
    pub pairs: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Rays whose boundary is not bracketed below this radius are
    /// classified as unbounded.
    pub r_cap: f64,
    /// Smallest sampled magnitude, relative to R.
    pub log_floor: f64,
    /// Run independent tasks on the rayon pool when the `parallel` feature
    /// is enabled. Results do not depend on this flag.
    #[serde(skip, default = "default_parallel")]
    pub parallel: bool,
}

fn default_parallel() -> bool {
    true
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            box_half_width: 10.0,
            triples: 10_000,
            z_per_triple: 4,
            grid: 400,
            pairs: 20_000,
            t_min: 1e-6,
            t_max: 1e3,
            seed: 0,
            r_cap: 1e12,
            log_floor: 1e-6,
            parallel: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.box_half_width > 0.0 && self.box_half_width.is_finite()) {
            return bad("box half-width must be positive");
        }
        if self.triples == 0 || self.z_per_triple == 0 || self.grid == 0 || self.pairs == 0 {
            return bad("all counts must be at least 1");
        }
        if !(self.t_min > 0.0 && self.t_min < self.t_max) {
            return bad("need 0 < t_min < t_max");
        }
        if !(self.r_cap > 1.0) {
            return bad("r_cap must exceed 1");
        }
        if !(self.log_floor > 0.0 && self.log_floor < 1.0) {
            return bad("log_floor must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Pattern-search refinement of the K estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub rounds: usize,
    pub shrink: f64,
    /// Initial step relative to the largest coordinate of the start pair.
    pub initial_step: f64,
    /// Extra estimation levels, each doubling the box outward and halving
    /// the inner floor.
    pub doublings: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            rounds: 40,
            shrink: 0.5,
            initial_step: 0.25,
            doublings: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stream {
    Convexity = 1,
    Triples = 2,
    Pairs = 3,
    Sections = 4,
}

pub(crate) fn task_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((stream as u64) << 56));
    rng.set_stream(index);
    rng
}

/// One coordinate: a mixture concentrating mass near 0 (log scale), near
/// the box edge, and uniformly in between.
pub(crate) fn sample_coordinate<R: Rng>(rng: &mut R, r: f64, log_floor: f64) -> f64 {
    let lf = log_floor.log10();
    let magnitude = match rng.gen_range(0..3) {
        0 => r * 10f64.powf(rng.gen_range(lf..0.0)),
        1 => r * rng.gen_range(0.0..1.0),
        _ => r * (1.0 - 10f64.powf(rng.gen_range(lf..0.0))),
    };
    if rng.gen_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

pub(crate) fn sample_point<R: Rng>(rng: &mut R, n: usize, r: f64, log_floor: f64) -> Point {
    (0..n).map(|_| sample_coordinate(rng, r, log_floor)).collect()
}

pub(crate) fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.gen_range(lo.log10()..hi.log10()))
}

/// Uniform direction on the unit sphere.
pub(crate) fn unit_direction<R: Rng>(rng: &mut R, n: usize) -> Point {
    if n == 1 {
        return vec![if rng.gen_bool(0.5) { 1.0 } else { -1.0 }];
    }
    loop {
        // Box–Muller normals
        let v: Point = (0..n)
            .map(|_| {
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

/// 1D grid: 0, then `grid` magnitudes log-spaced in [R·floor, R] on each
/// side, plus any extra points (kinks).
pub(crate) fn grid_1d(r: f64, log_floor: f64, grid: usize, extra: &[f64]) -> Vec<f64> {
    let mut pts = vec![0.0];
    let lo = (r * log_floor).log10();
    let hi = r.log10();
    for i in 0..grid {
        let e = if grid == 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (grid - 1) as f64
        };
        let m = 10f64.powf(e);
        pts.push(m);
        pts.push(-m);
    }
    pts.extend(extra.iter().filter(|k| k.abs() <= r));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}
