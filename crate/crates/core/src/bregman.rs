//! Bregman gaps, the monotone gap of the subdifferential, the two-sided
//! characterization residuals and the quasi-symmetry ratio.
//!
//! With D(y; x, p) = φ(y) − φ(x) − p·(y − x) and M = (p − q)·(x − y), the
//! identity M = D(y; x, p) + D(x; y, q) turns the two-sided bound
//!
//! ```text
//! (K+1)/K · D(y; x, p) ≤ M ≤ (K+1) · D(y; x, p)
//! ```
//!
//! into `1/K ≤ D(x; y, q) / D(y; x, p) ≤ K`, so the smallest admissible
//! constant at a pair is `max(r, 1/r)` for the ratio `r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{dot, sub, FunctionSpec, SubgradientPair};

fn check(f: &FunctionSpec, v: &[f64]) -> Result<()> {
    if v.len() == f.dimension() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: f.dimension(),
            got: v.len(),
        })
    }
}

fn check_pair(f: &FunctionSpec, a: &SubgradientPair) -> Result<()> {
    check(f, &a.point)?;
    check(f, &a.slope)
}

/// D(y; x, p) for the base pair (x, p).
pub fn bregman_gap(f: &FunctionSpec, base: &SubgradientPair, y: &[f64]) -> Result<f64> {
    check_pair(f, base)?;
    check(f, y)?;
    let d = f.gap(&base.point, &base.slope, y);
    if d.is_nan() {
        return Err(Error::NonFinite { point: y.to_vec() });
    }
    Ok(d)
}

/// (p − q)·(x − y) for pairs (x, p) and (y, q).
pub fn monotone_gap(f: &FunctionSpec, a: &SubgradientPair, b: &SubgradientPair) -> Result<f64> {
    check_pair(f, a)?;
    check_pair(f, b)?;
    Ok(dot(&sub(&a.slope, &b.slope), &sub(&a.point, &b.point)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationResidual {
    /// M − (K+1)/K · D
    pub lower_slack: f64,
    /// (K+1) · D − M
    pub upper_slack: f64,
}

impl CharacterizationResidual {
    pub fn holds(&self, tol: f64) -> bool {
        self.lower_slack >= -tol && self.upper_slack >= -tol
    }
}

pub fn characterization_residual(
    f: &FunctionSpec,
    a: &SubgradientPair,
    b: &SubgradientPair,
    k: f64,
) -> Result<CharacterizationResidual> {
    if !(k > 1.0) {
        return Err(Error::InvalidConstant(k));
    }
    let d = bregman_gap(f, a, &b.point)?;
    let m = monotone_gap(f, a, b)?;
    Ok(CharacterizationResidual {
        lower_slack: m - (k + 1.0) / k * d,
        upper_slack: (k + 1.0) * d - m,
    })
}

/// Ratio of two gaps with the zero conventions: `+∞` for a vanishing
/// denominator, `1` when both vanish.
pub fn gap_ratio(numerator: f64, denominator: f64) -> f64 {
    let (num, den) = (numerator.max(0.0), denominator.max(0.0));
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Smallest K with 1/K ≤ r ≤ K.
pub fn min_constant(ratio: f64) -> f64 {
    if ratio == 0.0 || ratio.is_infinite() {
        f64::INFINITY
    } else {
        ratio.max(1.0 / ratio)
    }
}

/// D(x; y, ∇φ(y)) / D(y; x, ∇φ(x)).
///
/// `+∞` flags a flat segment leaving x toward y, a candidate violation of
/// strict convexity.
pub fn symmetry_ratio(f: &FunctionSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check(f, x)?;
    check(f, y)?;
    if x == y {
        return Err(Error::InvalidParameter("symmetry ratio needs x != y".into()));
    }
    let num = f.smooth_gap(y, x)?;
    let den = f.smooth_gap(x, y)?;
    if num.is_nan() || den.is_nan() || num.is_infinite() || den.is_infinite() {
        return Err(Error::NonFinite { point: y.to_vec() });
    }
    Ok(gap_ratio(num, den))
}

/// Smallest constant making the two-sided bound hold at (x, y) for every
/// choice of extreme subgradients. Kinks in dimension > 1 give `+∞`.
pub fn pair_min_constant(f: &FunctionSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x == y {
        return Ok(1.0);
    }
    match (f.extreme_subgradients(x), f.extreme_subgradients(y)) {
        (Ok(px), Ok(qy)) if px.len() == 1 && qy.len() == 1 => {
            symmetry_ratio(f, x, y).map(min_constant)
        }
        (Ok(px), Ok(qy)) => {
            let mut worst: f64 = 1.0;
            for p in &px {
                for q in &qy {
                    let den = f.gap(x, p, y);
                    let num = f.gap(y, q, x);
                    if num.is_nan() || den.is_nan() {
                        return Err(Error::NonFinite { point: y.to_vec() });
                    }
                    worst = worst.max(min_constant(gap_ratio(num, den)));
                }
            }
            Ok(worst)
        }
        (Err(Error::Kink { .. }), _) | (_, Err(Error::Kink { .. })) => Ok(f64::INFINITY),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(t: &str) -> FunctionSpec {
        FunctionSpec::from_tag(t).unwrap()
    }

    fn pair(x: f64, p: f64) -> SubgradientPair {
        SubgradientPair::new(vec![x], vec![p])
    }

    #[test]
    fn gap_examples() {
        let f = tag("ex21");
        assert_eq!(bregman_gap(&f, &pair(1.0, 4.0), &[-1.0]).unwrap(), 8.0);
        assert_eq!(bregman_gap(&f, &pair(-1.0, -2.0), &[1.0]).unwrap(), 4.0);
        assert_eq!(bregman_gap(&f, &pair(1.0, 4.0), &[1.0]).unwrap(), 0.0);
        assert!(bregman_gap(&f, &pair(1.0, 4.0), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn monotone_gap_examples() {
        let f = tag("ex21");
        assert_eq!(monotone_gap(&f, &pair(1.0, 4.0), &pair(-1.0, -2.0)).unwrap(), 12.0);
        assert_eq!(monotone_gap(&f, &pair(1.0, 4.0), &pair(1.0, 4.0)).unwrap(), 0.0);
        let q = tag("quad");
        assert_eq!(monotone_gap(&q, &pair(0.0, 0.0), &pair(1.0, 2.0)).unwrap(), 2.0);
    }

    #[test]
    fn residual_examples() {
        let f = tag("ex21");
        let r = characterization_residual(&f, &pair(1.0, 4.0), &pair(-1.0, -2.0), 2.0).unwrap();
        assert_eq!((r.lower_slack, r.upper_slack), (0.0, 12.0));
        let q = tag("quad");
        let r = characterization_residual(&q, &pair(0.5, 1.0), &pair(-2.0, -4.0), 2.0).unwrap();
        assert!(r.holds(0.0));
        let a = tag("abs");
        let r = characterization_residual(&a, &pair(0.0, -1.0), &pair(1.0, 1.0), 10.0).unwrap();
        assert!(r.lower_slack < 0.0);
        assert!((r.lower_slack - (2.0 - 1.1 * 2.0)).abs() < 1e-15);
        assert!(matches!(
            characterization_residual(&q, &pair(0.0, 0.0), &pair(1.0, 2.0), 1.0),
            Err(Error::InvalidConstant(_))
        ));
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(symmetry_ratio(&tag("quad"), &[0.3], &[-4.0]).unwrap(), 1.0);
        let h: f64 = 10.0;
        let closed = (1.0 + (h - 1.0) * h.exp()) / (h.exp() - 1.0 - h);
        let r = symmetry_ratio(&tag("exp"), &[-3.0], &[-3.0 + h]).unwrap();
        assert!((r - closed).abs() < 1e-12 * closed);
        assert!((r - 9.005).abs() < 1e-3);
        let x = 0.01;
        let r = symmetry_ratio(&tag("ex21"), &[x], &[-x * x]).unwrap();
        assert!((r - 50.0).abs() < 1e-9, "{r}");
        assert!(matches!(
            symmetry_ratio(&tag("abs"), &[0.0], &[1.0]),
            Err(Error::Kink { .. })
        ));
        assert!(symmetry_ratio(&tag("quad"), &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_conventions() {
        assert_eq!(gap_ratio(0.0, 0.0), 1.0);
        assert_eq!(gap_ratio(1.0, 0.0), f64::INFINITY);
        assert_eq!(gap_ratio(0.0, 2.0), 0.0);
        assert_eq!(min_constant(0.0), f64::INFINITY);
        assert_eq!(min_constant(0.25), 4.0);
        // the flat direction of the strip gives equal zero gaps
        assert_eq!(symmetry_ratio(&tag("strip2d"), &[1.0, 0.0], &[1.0, 5.0]).unwrap(), 1.0);
    }

    #[test]
    fn pair_constant_at_kink_is_infinite() {
        let a = tag("abs");
        assert_eq!(pair_min_constant(&a, &[0.0], &[1.0]).unwrap(), f64::INFINITY);
        assert_eq!(pair_min_constant(&a, &[2.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(pair_min_constant(&a, &[2.0], &[-1.0]).unwrap(), 2.0);
        let m = FunctionSpec::parse("max(x1, x2) + x1^2 + x2^2", 2).unwrap();
        assert_eq!(pair_min_constant(&m, &[1.0, 1.0], &[0.0, 2.0]).unwrap(), f64::INFINITY);
        assert_eq!(pair_min_constant(&tag("quartic"), &[1.0], &[1.0]).unwrap(), 1.0);
    }
}
