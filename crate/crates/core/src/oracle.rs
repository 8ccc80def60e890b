//! Convex functions on ℝⁿ: the built-in catalog, parsed expressions, and
//! the derived forms (line restrictions, affine perturbations, normalization
//! at the origin) used by the rest of the crate.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcdef::{self, slopes_differ, ExprTree};
use crate::sampling::{self, SamplerConfig};

pub type Point = Vec<f64>;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn axpy(x: &[f64], s: f64, d: &[f64]) -> Point {
    x.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

/// A point together with a slope from its subdifferential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgradientPair {
    pub point: Point,
    pub slope: Point,
}

impl SubgradientPair {
    pub fn new(point: Point, slope: Point) -> Self {
        Self { point, slope }
    }
}

/// Closed interval `[lo, hi]`; endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::report::ext_real")]
    pub lo: f64,
    #[serde(with = "crate::report::ext_real")]
    pub hi: f64,
}

impl Interval {
    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    Smooth,
    HasKinks,
    Unknown,
}

/// Built-in functions.
#[derive(Debug, Clone, PartialEq)]
pub enum Catalog {
    /// x²
    Quad,
    /// x⁴
    Quartic,
    /// x⁴ for x ≥ 0, x² for x < 0
    Ex21,
    /// |x|
    Abs,
    /// eˣ
    Exp,
    /// e^{x²}
    ExpSq,
    /// a·x + b
    Affine { slope: Vec<f64>, offset: f64 },
    /// (x, y) ↦ x²
    Strip2d,
    /// xᵀAx, A positive semidefinite, stored row-major
    PolyQuad { matrix: Vec<f64> },
}

impl Catalog {
    pub const TAGS: [&'static str; 9] = [
        "quad", "quartic", "ex21", "abs", "exp", "expsq", "affine", "strip2d", "polyquad",
    ];

    /// Catalog entry with default parameters: affine is 2x + 1, polyquad
    /// uses A = [[2, 1], [1, 2]].
    pub fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag {
            "quad" => Catalog::Quad,
            "quartic" => Catalog::Quartic,
            "ex21" => Catalog::Ex21,
            "abs" => Catalog::Abs,
            "exp" => Catalog::Exp,
            "expsq" => Catalog::ExpSq,
            "affine" => Catalog::Affine {
                slope: vec![2.0],
                offset: 1.0,
            },
            "strip2d" => Catalog::Strip2d,
            "polyquad" => Catalog::PolyQuad {
                matrix: vec![2.0, 1.0, 1.0, 2.0],
            },
            other => return Err(Error::UnknownBuiltin(other.to_string())),
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Catalog::Quad => "quad",
            Catalog::Quartic => "quartic",
            Catalog::Ex21 => "ex21",
            Catalog::Abs => "abs",
            Catalog::Exp => "exp",
            Catalog::ExpSq => "expsq",
            Catalog::Affine { .. } => "affine",
            Catalog::Strip2d => "strip2d",
            Catalog::PolyQuad { .. } => "polyquad",
        }
    }

    fn dimension(&self) -> usize {
        match self {
            Catalog::Affine { slope, .. } => slope.len(),
            Catalog::Strip2d => 2,
            Catalog::PolyQuad { matrix } => (matrix.len() as f64).sqrt().round() as usize,
            _ => 1,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Catalog::Quad => x[0] * x[0],
            Catalog::Quartic => x[0].powi(4),
            Catalog::Ex21 => {
                if x[0] >= 0.0 {
                    x[0].powi(4)
                } else {
                    x[0] * x[0]
                }
            }
            Catalog::Abs => x[0].abs(),
            Catalog::Exp => x[0].exp(),
            Catalog::ExpSq => (x[0] * x[0]).exp(),
            Catalog::Affine { slope, offset } => dot(slope, x) + offset,
            Catalog::Strip2d => x[0] * x[0],
            Catalog::PolyQuad { matrix } => quad_form(matrix, x, x),
        }
    }

    /// One-sided derivative in direction `d`.
    fn directional(&self, x: &[f64], d: &[f64]) -> f64 {
        match self {
            Catalog::Abs if x[0] == 0.0 => d[0].abs(),
            Catalog::Abs => x[0].signum() * d[0],
            _ => dot(&self.smooth_gradient(x), d),
        }
    }

    /// Gradient formula; at the kink of `abs` it returns the right slope.
    fn smooth_gradient(&self, x: &[f64]) -> Point {
        match self {
            Catalog::Quad => vec![2.0 * x[0]],
            Catalog::Quartic => vec![4.0 * x[0].powi(3)],
            Catalog::Ex21 => {
                if x[0] >= 0.0 {
                    vec![4.0 * x[0].powi(3)]
                } else {
                    vec![2.0 * x[0]]
                }
            }
            Catalog::Abs => vec![if x[0] >= 0.0 { 1.0 } else { -1.0 }],
            Catalog::Exp => vec![x[0].exp()],
            Catalog::ExpSq => vec![2.0 * x[0] * (x[0] * x[0]).exp()],
            Catalog::Affine { slope, .. } => slope.clone(),
            Catalog::Strip2d => vec![2.0 * x[0], 0.0],
            Catalog::PolyQuad { matrix } => {
                let n = x.len();
                (0..n)
                    .map(|i| (0..n).map(|j| (matrix[i * n + j] + matrix[j * n + i]) * x[j]).sum())
                    .collect()
            }
        }
    }

    /// D(y; x, ∇φ(x)) in a cancellation-free closed form where one exists.
    fn smooth_gap(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let h = sub(y, x);
        Some(match self {
            Catalog::Quad => h[0] * h[0],
            Catalog::Quartic => quartic_gap(x[0], h[0]),
            Catalog::Ex21 => {
                let (a, b) = (x[0], y[0]);
                if a >= 0.0 && b >= 0.0 {
                    quartic_gap(a, h[0])
                } else if a < 0.0 && b < 0.0 {
                    h[0] * h[0]
                } else if a >= 0.0 {
                    // b < 0: every term is nonnegative
                    b * b + 3.0 * a.powi(4) - 4.0 * a.powi(3) * b
                } else {
                    b.powi(4) + a * a - 2.0 * a * b
                }
            }
            // the factored forms only pay off for small steps; far steps
            // would multiply an underflowed base by an overflowed remainder
            Catalog::Exp if h[0].abs() < 0.5 => x[0].exp() * exp_remainder(h[0]),
            Catalog::Exp => (x[0] + h[0]).exp() - x[0].exp() * (1.0 + h[0]),
            Catalog::ExpSq => {
                let u = h[0] * (2.0 * x[0] + h[0]);
                let e = (x[0] * x[0]).exp();
                if u.abs() < 0.5 {
                    e * (exp_remainder(u) + h[0] * h[0])
                } else {
                    let z = x[0] + h[0];
                    (z * z).exp() - e * (1.0 + 2.0 * x[0] * h[0])
                }
            }
            Catalog::Affine { .. } => 0.0,
            Catalog::Strip2d => h[0] * h[0],
            Catalog::PolyQuad { matrix } => quad_form(matrix, &h, &h),
            Catalog::Abs => return None,
        })
    }
}

fn quad_form(matrix: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    (0..n)
        .map(|i| a[i] * (0..n).map(|j| matrix[i * n + j] * b[j]).sum::<f64>())
        .sum()
}

// (x+h)⁴ − x⁴ − 4x³h = h²(2x² + (2x+h)²)
fn quartic_gap(x: f64, h: f64) -> f64 {
    let s = 2.0 * x + h;
    h * h * (2.0 * x * x + s * s)
}

/// eʰ − 1 − h without cancellation for small |h|.
pub(crate) fn exp_remainder(h: f64) -> f64 {
    if h.abs() < 0.5 {
        let mut term = h * h / 2.0;
        let mut sum = term;
        for k in 3..40 {
            term *= h / k as f64;
            sum += term;
            if term.abs() <= f64::EPSILON * sum.abs() {
                break;
            }
        }
        sum
    } else {
        h.exp_m1() - h
    }
}

#[derive(Debug, Clone)]
enum Body {
    Catalog(Catalog),
    Expr(Arc<ExprTree>),
    /// s ↦ f(origin + s·direction)
    Line {
        inner: Arc<FunctionSpec>,
        origin: Point,
        direction: Point,
    },
    /// f + slope·x + offset
    Affine {
        inner: Arc<FunctionSpec>,
        slope: Point,
        offset: f64,
    },
}

/// An evaluatable convex function ℝⁿ → ℝ.
///
/// Values are immutable and cheap to clone; all methods are pure.
#[derive(Debug, Clone)]
pub struct FunctionSpec {
    dimension: usize,
    body: Body,
    smoothness: Smoothness,
    label: String,
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl FunctionSpec {
    pub fn builtin(catalog: Catalog) -> Result<Self> {
        let dimension = catalog.dimension();
        match &catalog {
            Catalog::PolyQuad { matrix } if dimension * dimension != matrix.len() || dimension == 0 => {
                return Err(Error::InvalidParameter("polyquad matrix must be square".into()));
            }
            Catalog::Affine { slope, .. } if slope.is_empty() => {
                return Err(Error::InvalidParameter("affine slope must be nonempty".into()));
            }
            _ => {}
        }
        let smoothness = if matches!(catalog, Catalog::Abs) {
            Smoothness::HasKinks
        } else {
            Smoothness::Smooth
        };
        Ok(Self {
            dimension,
            label: catalog.tag().to_string(),
            body: Body::Catalog(catalog),
            smoothness,
        })
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        Self::builtin(Catalog::from_tag(tag)?)
    }

    /// Parses `text` and rejects it unless it passes [`convexity_probe`]
    /// on the default sampler box.
    pub fn parse(text: &str, dimension: usize) -> Result<Self> {
        let f = Self::from_tree(funcdef::parse(text, dimension)?, dimension)?;
        match convexity_probe(&f, &SamplerConfig::default()) {
            ConvexityProbe::Pass => Ok(f),
            ConvexityProbe::Violation { x, y } => Err(Error::NotConvex { x, y }),
        }
    }

    /// Wraps a tree without the convexity probe.
    pub fn from_tree(tree: ExprTree, dimension: usize) -> Result<Self> {
        if let Some(i) = tree.max_var() {
            if i >= dimension {
                return Err(Error::VariableOutOfRange {
                    index: i + 1,
                    dimension,
                });
            }
        }
        let smoothness = if tree.may_have_kinks() {
            Smoothness::Unknown
        } else {
            Smoothness::Smooth
        };
        Ok(Self {
            dimension,
            label: tree.to_canonical(dimension),
            body: Body::Expr(Arc::new(tree)),
            smoothness,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn catalog(&self) -> Option<&Catalog> {
        match &self.body {
            Body::Catalog(c) => Some(c),
            _ => None,
        }
    }

    pub fn expr(&self) -> Option<&ExprTree> {
        match &self.body {
            Body::Expr(t) => Some(t),
            _ => None,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dimension {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            })
        }
    }

    /// φ(x), possibly non-finite on overflow.
    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        match &self.body {
            Body::Catalog(c) => c.value(x),
            Body::Expr(t) => t.eval(x),
            Body::Line {
                inner,
                origin,
                direction,
            } => inner.value(&axpy(origin, x[0], direction)),
            Body::Affine {
                inner,
                slope,
                offset,
            } => inner.value(x) + dot(slope, x) + offset,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let v = self.value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { point: x.to_vec() })
        }
    }

    pub(crate) fn directional(&self, x: &[f64], d: &[f64]) -> f64 {
        match &self.body {
            Body::Catalog(c) => c.directional(x, d),
            Body::Expr(t) => t.eval_directional(x, d).1,
            Body::Line {
                inner,
                origin,
                direction,
            } => {
                let w = axpy(origin, x[0], direction);
                let scaled: Point = direction.iter().map(|v| v * d[0]).collect();
                inner.directional(&w, &scaled)
            }
            Body::Affine { inner, slope, .. } => inner.directional(x, d) + dot(slope, d),
        }
    }

    /// One-sided directional derivative φ′(x; d).
    pub fn directional_derivative(&self, x: &[f64], d: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(d)?;
        Ok(self.directional(x, d))
    }

    /// ∇φ(x); fails at points where the subdifferential is not a singleton.
    ///
    /// A convex function is differentiable wherever its partial derivatives
    /// exist, so checking both one-sided derivatives along each coordinate
    /// is sufficient.
    pub fn gradient(&self, x: &[f64]) -> Result<Point> {
        self.check_dim(x)?;
        let g = if let Body::Catalog(c) = &self.body {
            if matches!(c, Catalog::Abs) && x[0] == 0.0 {
                return Err(Error::Kink { point: x.to_vec() });
            }
            c.smooth_gradient(x)
        } else {
            let mut e = vec![0.0; self.dimension];
            let mut g = Vec::with_capacity(self.dimension);
            for i in 0..self.dimension {
                e[i] = 1.0;
                let right = self.directional(x, &e);
                e[i] = -1.0;
                let left = -self.directional(x, &e);
                e[i] = 0.0;
                if slopes_differ(left, right) {
                    return Err(Error::Kink { point: x.to_vec() });
                }
                g.push(right);
            }
            g
        };
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::NonFinite { point: x.to_vec() })
        }
    }

    /// `[φ′₋(x), φ′₊(x)]` for a one-dimensional function.
    pub fn subdifferential_interval_1d(&self, x: f64) -> Result<Interval> {
        if self.dimension != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: self.dimension,
            });
        }
        let hi = self.directional(&[x], &[1.0]);
        let lo = -self.directional(&[x], &[-1.0]);
        Ok(Interval { lo, hi })
    }

    /// The extreme points of ∂φ(x) that the checks iterate over: both
    /// one-sided slopes at a 1D kink, the gradient elsewhere.
    pub fn extreme_subgradients(&self, x: &[f64]) -> Result<Vec<Point>> {
        if self.dimension == 1 {
            let iv = self.subdifferential_interval_1d(x[0])?;
            if !(iv.lo.is_finite() && iv.hi.is_finite()) {
                return Err(Error::NonFinite { point: x.to_vec() });
            }
            if slopes_differ(iv.lo, iv.hi) {
                return Ok(vec![vec![iv.lo], vec![iv.hi]]);
            }
            return Ok(vec![vec![iv.hi]]);
        }
        Ok(vec![self.gradient(x)?])
    }

    /// ψ(s) = φ((1−s)x + sz).
    pub fn restrict_to_line(&self, x: &[f64], z: &[f64]) -> Result<FunctionSpec> {
        self.check_dim(x)?;
        self.check_dim(z)?;
        if x == z {
            return Err(Error::DegenerateLine);
        }
        let direction = sub(z, x);
        let smoothness = match self.smoothness {
            Smoothness::Smooth => Smoothness::Smooth,
            _ => Smoothness::Unknown,
        };
        Ok(FunctionSpec {
            dimension: 1,
            label: format!("{} on line {:?} -> {:?}", self.label, x, z),
            body: Body::Line {
                inner: Arc::new(self.clone()),
                origin: x.to_vec(),
                direction,
            },
            smoothness,
        })
    }

    /// f + slope·x + offset.
    pub fn add_affine(&self, slope: &[f64], offset: f64) -> Result<FunctionSpec> {
        self.check_dim(slope)?;
        Ok(FunctionSpec {
            dimension: self.dimension,
            label: format!("{} + affine({:?}, {})", self.label, slope, offset),
            body: Body::Affine {
                inner: Arc::new(self.clone()),
                slope: slope.to_vec(),
                offset,
            },
            smoothness: self.smoothness,
        })
    }

    /// ψ(x) = φ(x) − φ(0) − ∇φ(0)·x.
    ///
    /// A function that is already normalized is returned unchanged, which
    /// makes the operation idempotent.
    pub fn normalize_at_origin(&self) -> Result<FunctionSpec> {
        let zero = vec![0.0; self.dimension];
        let v0 = self.evaluate(&zero)?;
        let g0 = self.gradient(&zero)?;
        if v0 == 0.0 && g0.iter().all(|g| *g == 0.0) {
            return Ok(self.clone());
        }
        let slope: Point = g0.iter().map(|g| -g).collect();
        let mut out = self.add_affine(&slope, -v0)?;
        out.label = format!("normalized({})", self.label);
        Ok(out)
    }

    /// D(y; x, p) = φ(y) − φ(x) − p·(y − x).
    ///
    /// Affine parts cancel symbolically and catalog functions use closed
    /// forms, so the result carries no cancellation error from large
    /// function values. Generic expressions fall back to the direct formula
    /// with gaps below the rounding floor reported as zero.
    pub(crate) fn gap(&self, x: &[f64], p: &[f64], y: &[f64]) -> f64 {
        match &self.body {
            Body::Catalog(c) => match c.smooth_gap(x, y) {
                Some(d) => {
                    let g = c.smooth_gradient(x);
                    let correction = dot(&sub(&g, p), &sub(y, x));
                    d + correction
                }
                None => direct_gap(self, x, p, y),
            },
            Body::Affine { inner, slope, .. } => inner.gap(x, &sub(p, slope), y),
            Body::Line {
                inner,
                origin,
                direction,
            } => {
                let wx = axpy(origin, x[0], direction);
                let wy = axpy(origin, y[0], direction);
                match inner.gradient(&wx) {
                    Ok(g) => {
                        let along = dot(&g, direction);
                        inner.gap(&wx, &g, &wy) + (along - p[0]) * (y[0] - x[0])
                    }
                    Err(_) => direct_gap(self, x, p, y),
                }
            }
            Body::Expr(_) => expr_gap(self, x, p, y),
        }
    }

    /// D(y; x, ∇φ(x)); errors when φ has a kink at x.
    pub(crate) fn smooth_gap(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match &self.body {
            Body::Catalog(c) => match c.smooth_gap(x, y) {
                Some(d) => Ok(d),
                None => {
                    let g = self.gradient(x)?;
                    Ok(direct_gap(self, x, &g, y))
                }
            },
            Body::Affine { inner, .. } => inner.smooth_gap(x, y),
            Body::Line {
                inner,
                origin,
                direction,
            } => {
                let wx = axpy(origin, x[0], direction);
                let wy = axpy(origin, y[0], direction);
                inner.smooth_gap(&wx, &wy)
            }
            Body::Expr(_) => {
                let g = self.gradient(x)?;
                Ok(expr_gap(self, x, &g, y))
            }
        }
    }

    /// Kinks of a one-dimensional function inside `[-window, window]`.
    pub fn kinks_1d(&self, window: f64) -> Vec<f64> {
        if self.dimension != 1 || self.smoothness == Smoothness::Smooth {
            return Vec::new();
        }
        match &self.body {
            Body::Catalog(Catalog::Abs) => vec![0.0],
            Body::Expr(t) => funcdef::derivative_1d(t)
                .kinks
                .into_iter()
                .map(|k| k.at)
                .filter(|k| k.abs() <= window)
                .collect(),
            Body::Affine { inner, .. } => inner.kinks_1d(window),
            _ => Vec::new(),
        }
    }
}

/// Rounding floor relative to the magnitude of the terms of a direct gap.
const GAP_NOISE_FLOOR: f64 = 64.0 * f64::EPSILON;

fn direct_gap(f: &FunctionSpec, x: &[f64], p: &[f64], y: &[f64]) -> f64 {
    let (d, scale) = direct_terms(f, x, p, y);
    if d.abs() <= GAP_NOISE_FLOOR * scale {
        0.0
    } else {
        d
    }
}

fn direct_terms(f: &FunctionSpec, x: &[f64], p: &[f64], y: &[f64]) -> (f64, f64) {
    let fy = f.value(y);
    let fx = f.value(x);
    let lin = dot(p, &sub(y, x));
    (fy - fx - lin, fy.abs() + fx.abs() + lin.abs())
}

/// Below this fraction of the term magnitudes the direct gap of an
/// expression is recomputed by quadrature.
const CANCELLATION_RATIO: f64 = 1e-6;

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Gap of an expression. Short steps lose the gap to cancellation in
/// φ(y) − φ(x); there it is the integral of φ′(x + sh; h) − φ′(x; h) over
/// [0, 1], which only cancels at first order. A kink on the segment shows
/// up as disagreement between one and two quadrature panels, and the
/// direct form is kept.
fn expr_gap(f: &FunctionSpec, x: &[f64], p: &[f64], y: &[f64]) -> f64 {
    let (d, scale) = direct_terms(f, x, p, y);
    if !(d.abs() < CANCELLATION_RATIO * scale) {
        return d;
    }
    let h = sub(y, x);
    let g0 = f.directional(x, &h);
    let integrand = |s: f64| f.directional(&axpy(x, s, &h), &h) - g0;
    let panel = |a: f64, b: f64| {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        GAUSS5
            .iter()
            .map(|(node, w)| w * integrand(mid + half * node))
            .sum::<f64>()
            * half
    };
    let one = panel(0.0, 1.0);
    let two = panel(0.0, 0.5) + panel(0.5, 1.0);
    let correction = g0 - dot(p, &h);
    if (one - two).abs() <= 1e-10 * two.abs() && two.is_finite() {
        two + correction
    } else {
        direct_gap(f, x, p, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexityProbe {
    Pass,
    Violation { x: Point, y: Point },
}

pub const CONVEXITY_TOL_ABS: f64 = 1e-9;
pub const CONVEXITY_TOL_REL: f64 = 1e-9;

fn midpoint_violated(f: &FunctionSpec, x: &[f64], y: &[f64]) -> bool {
    let mid: Point = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
    let (fx, fy, fm) = (f.value(x), f.value(y), f.value(&mid));
    if !(fx.is_finite() && fy.is_finite() && fm.is_finite()) {
        return false;
    }
    let chord = 0.5 * (fx + fy);
    fm > chord + CONVEXITY_TOL_ABS + CONVEXITY_TOL_REL * chord.abs()
}

/// Searches for a violation of midpoint convexity.
///
/// Deterministic symmetric stencils `(−s·eᵢ, s·eᵢ)` are tried first, then
/// random pairs from the sampler box. Piecewise definitions are also
/// checked for continuity at their breakpoints; a jump is reported as the
/// pair straddling it.
pub fn convexity_probe(f: &FunctionSpec, sampler: &SamplerConfig) -> ConvexityProbe {
    let n = f.dimension();
    if let Some(tree) = f.expr() {
        if n == 1 {
            for c in tree.breakpoints() {
                let eps = 1e-9 * (1.0 + c.abs());
                let (l, r) = (f.value(&[c - eps]), f.value(&[c]));
                if (l - r).abs() > 1e-6 * (1.0 + r.abs()) {
                    return ConvexityProbe::Violation {
                        x: vec![c - eps],
                        y: vec![c + eps],
                    };
                }
            }
        }
    }
    let r = sampler.box_half_width;
    for s in [1.0, r, 0.1, 1e-3] {
        for i in 0..n {
            let mut x = vec![0.0; n];
            let mut y = vec![0.0; n];
            x[i] = -s;
            y[i] = s;
            if midpoint_violated(f, &x, &y) {
                return ConvexityProbe::Violation { x, y };
            }
            // also off-centre pairs
            let shifted: Point = x.iter().map(|v| v + 0.5 * s).collect();
            if midpoint_violated(f, &shifted, &y) {
                return ConvexityProbe::Violation { x: shifted, y };
            }
        }
    }
    let mut rng = sampling::task_rng(sampler.seed, sampling::Stream::Convexity, 0);
    for _ in 0..sampler.triples.max(1000) {
        let x = sampling::sample_point(&mut rng, n, r, sampler.log_floor);
        let y = if rng.gen_bool(0.5) {
            sampling::sample_point(&mut rng, n, r, sampler.log_floor)
        } else {
            // close pairs catch narrow concave bumps
            let spread = r * 10f64.powf(rng.gen_range(-6.0..0.0));
            x.iter().map(|v| v + spread * rng.gen_range(-1.0..1.0)).collect()
        };
        if midpoint_violated(f, &x, &y) {
            return ConvexityProbe::Violation { x, y };
        }
    }
    ConvexityProbe::Pass
}
