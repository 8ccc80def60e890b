//! Sampling checks of the soft and full engulfing properties, the estimator
//! of the characterization constant K̂, and the constant relations between
//! the two properties.
//!
//! Soft engulfing with constant K: whenever y ∈ S(x, p, t), also
//! x ∈ S(y, q, Kt) for every q ∈ ∂φ(y). Full engulfing: the whole section
//! S(x, p, t) lies inside S(y, q, Kt).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bregman::{self, pair_min_constant};
use crate::error::{Error, Result};
use crate::oracle::{FunctionSpec, Point};
use crate::par;
use crate::sampling::{self, RefineConfig, SamplerConfig, Stream};
use crate::sections;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Soft,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

/// A violating configuration: `target` ∉ S(y, q, Kt) although y and
/// `target` both lie in S(x, p, t). In soft mode `target` is x itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Point,
    pub p: Point,
    pub t: f64,
    pub y: Point,
    pub q: Point,
    pub z: Point,
    /// D(z; y, q), which is at least K·t.
    #[serde(with = "crate::report::ext_real")]
    pub back_gap: f64,
}

impl Witness {
    /// Recomputes the membership chain from scratch: y and z are in
    /// S(x, p, t) and z is not in S(y, q, Kt).
    pub fn reverify(&self, f: &FunctionSpec, k: f64) -> Result<bool> {
        let y_in = sections::contains(f, &self.x, &self.p, self.t, &self.y)?;
        let z_in = sections::contains(f, &self.x, &self.p, self.t, &self.z)?;
        let z_back = sections::contains(f, &self.y, &self.q, k * self.t, &self.z)?;
        Ok(y_in && z_in && !z_back)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngulfingVerdict {
    pub mode: Mode,
    #[serde(rename = "K")]
    pub k: f64,
    pub verdict: Outcome,
    pub witness: Option<Witness>,
    /// Triples evaluated (up to and including the witness on failure).
    pub samples_used: usize,
    /// Triples skipped because a point was an nD kink or overflowed.
    pub samples_skipped: usize,
    /// Sampled rays that were cap-classified as unbounded.
    pub unbounded_rays: usize,
    pub seed: u64,
}

impl EngulfingVerdict {
    pub fn passed(&self) -> bool {
        self.verdict == Outcome::Pass
    }
}

/// One sampled configuration of the checks. Points z are drawn after y
/// from the same stream, so soft and full runs share x, p, t and y.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub x: Point,
    pub p: Point,
    pub t: f64,
    pub y: Point,
    /// Extra members of S(x, p, t) for full mode; x itself is not listed.
    pub zs: Vec<Point>,
    pub unbounded_rays: usize,
}

const KINK_PICK_PROBABILITY: f64 = 0.05;

/// Regenerates triple `index` of a run with this sampler configuration.
/// `None` when a sampled point had to be skipped.
pub fn triple(f: &FunctionSpec, sampler: &SamplerConfig, index: usize, with_z: bool) -> Option<Triple> {
    let mut rng = sampling::task_rng(sampler.seed, Stream::Triples, index as u64);
    let n = f.dimension();
    let kinks = f.kinks_1d(sampler.box_half_width);
    let x = if !kinks.is_empty() && rng.gen_bool(KINK_PICK_PROBABILITY) {
        vec![kinks[rng.gen_range(0..kinks.len())]]
    } else {
        sampling::sample_point(&mut rng, n, sampler.box_half_width, sampler.log_floor)
    };
    let slopes = f.extreme_subgradients(&x).ok()?;
    let p = slopes[rng.gen_range(0..slopes.len())].clone();
    let t = sampling::log_uniform(&mut rng, sampler.t_min, sampler.t_max);
    let mut unbounded_rays = 0;
    let mut member = |near: bool, rng: &mut rand_chacha::ChaCha8Rng| {
        let (m, unbounded) = sections::sample_member(f, &x, &p, t, sampler.r_cap, near, rng)?;
        unbounded_rays += usize::from(unbounded);
        Some(m)
    };
    let near = rng.gen_bool(0.5);
    let mut y = member(near, &mut rng)?;
    if !kinks.is_empty() && rng.gen_bool(2.0 * KINK_PICK_PROBABILITY) {
        let k = vec![kinks[rng.gen_range(0..kinks.len())]];
        if f.gap(&x, &p, &k) < t {
            y = k;
        }
    }
    let mut zs = Vec::new();
    if with_z {
        for j in 1..sampler.z_per_triple {
            if let Some(z) = member(j % 2 == 1, &mut rng) {
                zs.push(z);
            }
        }
    }
    Some(Triple {
        x,
        p,
        t,
        y,
        zs,
        unbounded_rays,
    })
}

enum TripleStatus {
    Ok { unbounded_rays: usize },
    Skipped,
    Violation(Box<Witness>),
}

fn evaluate_triple(f: &FunctionSpec, sampler: &SamplerConfig, k: f64, mode: Mode, i: usize) -> TripleStatus {
    let Some(tr) = triple(f, sampler, i, mode == Mode::Full) else {
        return TripleStatus::Skipped;
    };
    let Ok(qs) = f.extreme_subgradients(&tr.y) else {
        return TripleStatus::Skipped;
    };
    let bound = k * tr.t;
    let targets = std::iter::once(&tr.x).chain(tr.zs.iter());
    for z in targets {
        for q in &qs {
            let back = f.gap(&tr.y, q, z);
            if back.is_nan() {
                return TripleStatus::Skipped;
            }
            if back >= bound {
                return TripleStatus::Violation(Box::new(Witness {
                    x: tr.x.clone(),
                    p: tr.p.clone(),
                    t: tr.t,
                    y: tr.y.clone(),
                    q: q.clone(),
                    z: z.clone(),
                    back_gap: back,
                }));
            }
        }
        if mode == Mode::Soft {
            break;
        }
    }
    TripleStatus::Ok {
        unbounded_rays: tr.unbounded_rays,
    }
}

fn run_check(f: &FunctionSpec, k: f64, sampler: &SamplerConfig, mode: Mode) -> Result<EngulfingVerdict> {
    if !(k > 1.0) {
        return Err(Error::InvalidConstant(k));
    }
    sampler.validate()?;
    let statuses = par::map(sampler.triples, sampler.parallel, |i| {
        evaluate_triple(f, sampler, k, mode, i)
    });
    let mut skipped = 0;
    let mut unbounded_rays = 0;
    for (i, s) in statuses.into_iter().enumerate() {
        match s {
            TripleStatus::Ok { unbounded_rays: u } => unbounded_rays += u,
            TripleStatus::Skipped => skipped += 1,
            TripleStatus::Violation(w) => {
                return Ok(EngulfingVerdict {
                    mode,
                    k,
                    verdict: Outcome::Fail,
                    witness: Some(*w),
                    samples_used: i + 1 - skipped,
                    samples_skipped: skipped,
                    unbounded_rays,
                    seed: sampler.seed,
                });
            }
        }
    }
    Ok(EngulfingVerdict {
        mode,
        k,
        verdict: Outcome::Pass,
        witness: None,
        samples_used: sampler.triples - skipped,
        samples_skipped: skipped,
        unbounded_rays,
        seed: sampler.seed,
    })
}

/// Samples triples (x, t, y ∈ S(x, p, t)) and checks x ∈ S(y, q, Kt) for
/// every extreme q ∈ ∂φ(y).
pub fn check_soft(f: &FunctionSpec, k: f64, sampler: &SamplerConfig) -> Result<EngulfingVerdict> {
    run_check(f, k, sampler, Mode::Soft)
}

/// Samples triples plus extra members z of S(x, p, t) (z = x first) and
/// checks z ∈ S(y, q, Kt).
pub fn check_full(f: &FunctionSpec, k: f64, sampler: &SamplerConfig) -> Result<EngulfingVerdict> {
    run_check(f, k, sampler, Mode::Full)
}

/// K′ = 2K(K + 1): a soft constant K yields full engulfing with K′.
pub fn engulfing_constant_bound(k_soft: f64) -> Result<f64> {
    if !(k_soft > 1.0) {
        return Err(Error::InvalidConstant(k_soft));
    }
    Ok(2.0 * k_soft * (k_soft + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub box_half_width: f64,
    /// Smallest sampled magnitude.
    pub inner_radius: f64,
    pub pairs_evaluated: usize,
    pub pairs_skipped: usize,
    #[serde(with = "crate::report::ext_real")]
    pub grid_value: f64,
    #[serde(with = "crate::report::ext_real")]
    pub refined_value: f64,
    /// Relative growth during the final refinement round.
    pub last_round_growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    #[serde(with = "crate::report::ext_real")]
    pub value: f64,
    pub argmax_pair: (Point, Point),
    /// The running supremum grew by more than 5% in the last box doubling
    /// or the last refinement round. Evidence only, never proof.
    pub diverging: bool,
    pub levels: Vec<LevelSummary>,
}

impl KEstimate {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

pub const DIVERGENCE_GROWTH: f64 = 0.05;

fn pair_value(f: &FunctionSpec, x: &[f64], y: &[f64]) -> Option<f64> {
    pair_min_constant(f, x, y).ok().filter(|v| !v.is_nan())
}

struct Candidate {
    value: f64,
    x: Point,
    y: Point,
}

fn level_candidates(
    f: &FunctionSpec,
    sampler: &SamplerConfig,
    level: usize,
    r: f64,
    floor: f64,
) -> (Option<Candidate>, usize, usize) {
    let better = |a: &Option<Candidate>, v: f64| a.as_ref().is_none_or(|c| v > c.value);
    if f.dimension() == 1 {
        let pts = sampling::grid_1d(r, floor, sampler.grid, &f.kinks_1d(r));
        let rows = par::map(pts.len(), sampler.parallel, |i| {
            let mut best: Option<Candidate> = None;
            let mut evaluated = 0;
            let mut skipped = 0;
            for j in i + 1..pts.len() {
                match pair_value(f, &[pts[i]], &[pts[j]]) {
                    Some(v) => {
                        evaluated += 1;
                        if better(&best, v) {
                            best = Some(Candidate {
                                value: v,
                                x: vec![pts[i]],
                                y: vec![pts[j]],
                            });
                        }
                    }
                    None => skipped += 1,
                }
            }
            (best, evaluated, skipped)
        });
        merge(rows)
    } else {
        let n = f.dimension();
        let rows = par::map(sampler.pairs, sampler.parallel, |i| {
            let idx = (level * sampler.pairs + i) as u64;
            let mut rng = sampling::task_rng(sampler.seed, Stream::Pairs, idx);
            let x = sampling::sample_point(&mut rng, n, r, floor);
            let y = sampling::sample_point(&mut rng, n, r, floor);
            match pair_value(f, &x, &y) {
                Some(value) => (Some(Candidate { value, x, y }), 1, 0),
                None => (None, 0, 1),
            }
        });
        merge(rows)
    }
}

fn merge(rows: Vec<(Option<Candidate>, usize, usize)>) -> (Option<Candidate>, usize, usize) {
    let mut best: Option<Candidate> = None;
    let (mut ev, mut sk) = (0, 0);
    for (c, e, s) in rows {
        ev += e;
        sk += s;
        if let Some(c) = c {
            if best.as_ref().is_none_or(|b| c.value > b.value) {
                best = Some(c);
            }
        }
    }
    (best, ev, sk)
}

/// Compass search maximizing the pair constant over (x, y) in the box.
/// Returns the refined candidate and the growth of the last round.
fn refine(f: &FunctionSpec, start: Candidate, r: f64, cfg: &RefineConfig) -> (Candidate, f64) {
    let n = f.dimension();
    let mut v: Point = start.x.iter().chain(start.y.iter()).copied().collect();
    let mut best = start.value;
    let scale = v.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1e-300);
    let mut step = cfg.initial_step * scale;
    let mut last_growth = 0.0;
    const MAX_MOVES_PER_ROUND: usize = 64;
    for _ in 0..cfg.rounds {
        let before = best;
        for _ in 0..MAX_MOVES_PER_ROUND {
            let mut moved = false;
            'poll: for i in 0..2 * n {
                for sign in [1.0, -1.0] {
                    let mut trial = v.clone();
                    trial[i] = (trial[i] + sign * step).clamp(-r, r);
                    if trial[i] == v[i] || trial[..n] == trial[n..] {
                        continue;
                    }
                    if let Some(val) = pair_value(f, &trial[..n], &trial[n..]) {
                        if val > best {
                            best = val;
                            v = trial;
                            moved = true;
                            break 'poll;
                        }
                    }
                }
            }
            if !moved || best.is_infinite() {
                break;
            }
        }
        last_growth = if before > 0.0 && before.is_finite() {
            best / before - 1.0
        } else {
            0.0
        };
        if best.is_infinite() {
            break;
        }
        step *= cfg.shrink;
    }
    (
        Candidate {
            value: best,
            x: v[..n].to_vec(),
            y: v[n..].to_vec(),
        },
        last_growth,
    )
}

/// Estimates K̂ = sup over pairs of max(r, 1/r) for the quasi-symmetry
/// ratio r: dense grid (1D) or random pairs (nD) at the base box, pattern
/// search from the argmax, then the same on doubled boxes.
pub fn estimate_k_char(f: &FunctionSpec, sampler: &SamplerConfig, refine_cfg: &RefineConfig) -> Result<KEstimate> {
    sampler.validate()?;
    let mut levels = Vec::new();
    let mut overall: Option<Candidate> = None;
    let mut r = sampler.box_half_width;
    let mut inner = sampler.box_half_width * sampler.log_floor;
    for level in 0..=refine_cfg.doublings {
        let (cand, evaluated, skipped) = level_candidates(f, sampler, level, r, inner / r);
        let Some(cand) = cand else {
            return Err(Error::InvalidConfig("no pair could be evaluated".into()));
        };
        let grid_value = cand.value;
        let (refined, growth) = if cand.value.is_finite() {
            refine(f, cand, r, refine_cfg)
        } else {
            (cand, 0.0)
        };
        levels.push(LevelSummary {
            box_half_width: r,
            inner_radius: inner,
            pairs_evaluated: evaluated,
            pairs_skipped: skipped,
            grid_value,
            refined_value: refined.value,
            last_round_growth: growth,
        });
        if overall.as_ref().is_none_or(|o| refined.value > o.value) {
            overall = Some(refined);
        }
        r *= 2.0;
        inner /= 2.0;
    }
    let best = overall.expect("at least one level");
    let last = levels.last().unwrap();
    let doubling_growth = if levels.len() >= 2 {
        let prev = levels[levels.len() - 2].refined_value;
        last.refined_value > (1.0 + DIVERGENCE_GROWTH) * prev
    } else {
        false
    };
    let diverging = best.value.is_finite()
        && (doubling_growth || last.last_round_growth > DIVERGENCE_GROWTH);
    Ok(KEstimate {
        value: best.value,
        argmax_pair: (best.x, best.y),
        diverging,
        levels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub estimate: KEstimate,
    pub soft: Option<EngulfingVerdict>,
    pub full: Option<EngulfingVerdict>,
    pub conclusion: String,
}

pub const SOFT_MARGIN: f64 = 1e-3;

/// Estimates K̂, then checks soft engulfing at K̂(1 + 10⁻³) and full
/// engulfing at 2K(K + 1) of that constant. Soft pass should imply full
/// pass at the boosted constant.
pub fn check_equivalence(
    f: &FunctionSpec,
    sampler: &SamplerConfig,
    refine_cfg: &RefineConfig,
) -> Result<EquivalenceReport> {
    let estimate = estimate_k_char(f, sampler, refine_cfg)?;
    if !estimate.value.is_finite() {
        return Ok(EquivalenceReport {
            estimate,
            soft: None,
            full: None,
            conclusion: "not engulfing for any K (kink or flat segment)".into(),
        });
    }
    if estimate.diverging {
        return Ok(EquivalenceReport {
            estimate,
            soft: None,
            full: None,
            conclusion: "not engulfing for any K (estimate diverging)".into(),
        });
    }
    let k_soft = (estimate.value * (1.0 + SOFT_MARGIN)).max(1.0 + SOFT_MARGIN);
    let soft = check_soft(f, k_soft, sampler)?;
    let full = check_full(f, engulfing_constant_bound(k_soft)?, sampler)?;
    let conclusion = match (soft.passed(), full.passed()) {
        (true, true) => "soft and full engulfing consistent",
        (true, false) => "soft pass but full fail at the boosted constant",
        (false, _) => "soft engulfing violated at the estimated constant",
    }
    .to_string();
    Ok(EquivalenceReport {
        estimate,
        soft: Some(soft),
        full: Some(full),
        conclusion,
    })
}

/// Minimal constant at the pair (x, y) from the raw two-sided residual,
/// by bisection on K. Used to cross-check the ratio normal form.
pub fn residual_min_constant(f: &FunctionSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    let a = crate::oracle::SubgradientPair::new(x.to_vec(), f.gradient(x)?);
    let b = crate::oracle::SubgradientPair::new(y.to_vec(), f.gradient(y)?);
    let holds = |k: f64| -> Result<bool> {
        Ok(bregman::characterization_residual(f, &a, &b, k)?.holds(0.0))
    };
    let mut hi = 2.0;
    while !holds(hi)? {
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mid > 1.0 && holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(t: &str) -> FunctionSpec {
        FunctionSpec::from_tag(t).unwrap()
    }

    fn small() -> SamplerConfig {
        SamplerConfig {
            triples: 2000,
            grid: 120,
            pairs: 2000,
            ..Default::default()
        }
    }

    #[test]
    fn constant_bound() {
        assert_eq!(engulfing_constant_bound(2.0).unwrap(), 12.0);
        assert_eq!(engulfing_constant_bound(1.5).unwrap(), 7.5);
        assert!((engulfing_constant_bound(3.7).unwrap() - 34.78).abs() < 1e-12);
        assert!(engulfing_constant_bound(1.0).is_err());
    }

    #[test]
    fn quad_passes_soft() {
        let v = check_soft(&tag("quad"), 3.0, &small()).unwrap();
        assert!(v.passed());
        assert_eq!(v.samples_used, 2000);
    }

    #[test]
    fn abs_fails_soft_with_reproducible_witness() {
        let f = tag("abs");
        let v = check_soft(&f, 100.0, &small()).unwrap();
        assert_eq!(v.verdict, Outcome::Fail);
        let w = v.witness.unwrap();
        assert!(w.back_gap >= 100.0 * w.t);
        assert!(w.reverify(&f, 100.0).unwrap());
    }

    #[test]
    fn abs_spec_witness_family() {
        let f = tag("abs");
        let w = Witness {
            x: vec![1.0],
            p: vec![1.0],
            t: 0.01,
            y: vec![0.0],
            q: vec![-1.0],
            z: vec![1.0],
            back_gap: 2.0,
        };
        assert!(w.reverify(&f, 100.0).unwrap());
    }

    #[test]
    fn affine_passes_everything() {
        let f = tag("affine");
        assert!(check_soft(&f, 1.01, &small()).unwrap().passed());
        let v = check_full(&f, 1.01, &small()).unwrap();
        assert!(v.passed());
        assert!(v.unbounded_rays > 0);
    }

    #[test]
    fn quad_estimate_is_one() {
        let e = estimate_k_char(&tag("quad"), &small(), &RefineConfig::default()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9);
        assert!(!e.diverging);
    }

    #[test]
    fn abs_estimate_is_infinite() {
        let e = estimate_k_char(&tag("abs"), &small(), &RefineConfig::default()).unwrap();
        assert_eq!(e.value, f64::INFINITY);
    }

    #[test]
    fn exp_estimate_diverges() {
        let e = estimate_k_char(&tag("exp"), &small(), &RefineConfig::default()).unwrap();
        assert!(e.diverging, "{e:?}");
    }

    #[test]
    fn residual_bisection_matches_ratio_form() {
        let f = tag("quartic");
        for (x, y) in [(1.0, -3.7), (0.2, 0.9), (-2.0, 5.0)] {
            let k_res = residual_min_constant(&f, &[x], &[y]).unwrap();
            let k_ratio = pair_min_constant(&f, &[x], &[y]).unwrap();
            assert!((k_res - k_ratio).abs() <= 1e-9 * k_ratio, "{k_res} {k_ratio}");
        }
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(matches!(
            check_soft(&tag("quad"), 0.5, &small()),
            Err(Error::InvalidConstant(_))
        ));
    }
}
