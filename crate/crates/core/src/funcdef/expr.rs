use std::fmt;

/// Expression tree for user-supplied convex functions.
///
/// Only constructs that stay finite on all of ℝⁿ are representable: no
/// division, no fractional powers. Multiplication is always by a constant.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprTree {
    Const(f64),
    /// Zero-based variable index.
    Var(usize),
    Sum(Vec<ExprTree>),
    Scale(f64, Box<ExprTree>),
    Pow(Box<ExprTree>, u32),
    Exp(Box<ExprTree>),
    Abs(Box<ExprTree>),
    Max(Vec<ExprTree>),
    /// One-dimensional piecewise definition. Piece `i` is active on
    /// `[breakpoints[i-1], breakpoints[i])`; the last piece extends to +∞.
    Piecewise {
        breakpoints: Vec<f64>,
        pieces: Vec<ExprTree>,
    },
}

impl ExprTree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ExprTree::Const(c) => *c,
            ExprTree::Var(i) => x[*i],
            ExprTree::Sum(terms) => terms.iter().map(|t| t.eval(x)).sum(),
            ExprTree::Scale(c, e) => c * e.eval(x),
            ExprTree::Pow(e, k) => e.eval(x).powi(*k as i32),
            ExprTree::Exp(e) => e.eval(x).exp(),
            ExprTree::Abs(e) => e.eval(x).abs(),
            ExprTree::Max(args) => args
                .iter()
                .map(|a| a.eval(x))
                .fold(f64::NEG_INFINITY, f64::max),
            ExprTree::Piecewise { breakpoints, pieces } => {
                pieces[active_piece(breakpoints, x[0])].eval(x)
            }
        }
    }

    /// Value and one-sided directional derivative `f'(x; d)`.
    ///
    /// Exact forward-mode rules. At kinks the rules pick the one-sided
    /// branch selected by `d`, so `-f'(x; -d) != f'(x; d)` exactly when the
    /// tree is non-differentiable at `x` along `d`.
    pub fn eval_directional(&self, x: &[f64], d: &[f64]) -> (f64, f64) {
        match self {
            ExprTree::Const(c) => (*c, 0.0),
            ExprTree::Var(i) => (x[*i], d[*i]),
            ExprTree::Sum(terms) => terms.iter().fold((0.0, 0.0), |(v, dv), t| {
                let (tv, tdv) = t.eval_directional(x, d);
                (v + tv, dv + tdv)
            }),
            ExprTree::Scale(c, e) => {
                let (v, dv) = e.eval_directional(x, d);
                (c * v, c * dv)
            }
            ExprTree::Pow(e, k) => {
                let (v, dv) = e.eval_directional(x, d);
                let k = *k as i32;
                (v.powi(k), k as f64 * v.powi(k - 1) * dv)
            }
            ExprTree::Exp(e) => {
                let (v, dv) = e.eval_directional(x, d);
                let ev = v.exp();
                (ev, ev * dv)
            }
            ExprTree::Abs(e) => {
                let (v, dv) = e.eval_directional(x, d);
                if v > 0.0 {
                    (v, dv)
                } else if v < 0.0 {
                    (-v, -dv)
                } else {
                    (0.0, dv.abs())
                }
            }
            ExprTree::Max(args) => {
                let evals: Vec<(f64, f64)> =
                    args.iter().map(|a| a.eval_directional(x, d)).collect();
                let top = evals.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
                let slope = evals
                    .iter()
                    .filter(|e| e.0 == top)
                    .map(|e| e.1)
                    .fold(f64::NEG_INFINITY, f64::max);
                (top, slope)
            }
            ExprTree::Piecewise { breakpoints, pieces } => {
                let i = active_piece(breakpoints, x[0]);
                // at a breakpoint the active piece is the right one; moving
                // left uses the piece that ends there
                if d[0] < 0.0 && i > 0 && x[0] == breakpoints[i - 1] {
                    let (_, dv) = pieces[i - 1].eval_directional(x, d);
                    (pieces[i].eval(x), dv)
                } else {
                    pieces[i].eval_directional(x, d)
                }
            }
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            ExprTree::Const(_) => None,
            ExprTree::Var(i) => Some(*i),
            ExprTree::Scale(_, e) | ExprTree::Pow(e, _) | ExprTree::Exp(e) | ExprTree::Abs(e) => {
                e.max_var()
            }
            ExprTree::Sum(v) | ExprTree::Max(v) => v.iter().filter_map(|e| e.max_var()).max(),
            ExprTree::Piecewise { pieces, .. } => {
                // the switching variable is always x
                pieces.iter().filter_map(|e| e.max_var()).max().max(Some(0))
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        self.max_var().is_none()
    }

    /// True when the tree contains a construct that can produce kinks.
    pub fn may_have_kinks(&self) -> bool {
        match self {
            ExprTree::Const(_) | ExprTree::Var(_) => false,
            ExprTree::Abs(_) | ExprTree::Max(_) | ExprTree::Piecewise { .. } => true,
            ExprTree::Scale(_, e) | ExprTree::Pow(e, _) | ExprTree::Exp(e) => e.may_have_kinks(),
            ExprTree::Sum(v) => v.iter().any(|e| e.may_have_kinks()),
        }
    }

    /// Breakpoints of all piecewise nodes in the tree.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breakpoints(&mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            ExprTree::Const(_) | ExprTree::Var(_) => {}
            ExprTree::Scale(_, e) | ExprTree::Pow(e, _) | ExprTree::Exp(e) | ExprTree::Abs(e) => {
                e.collect_breakpoints(out)
            }
            ExprTree::Sum(v) | ExprTree::Max(v) => {
                v.iter().for_each(|e| e.collect_breakpoints(out))
            }
            ExprTree::Piecewise { breakpoints, pieces } => {
                out.extend_from_slice(breakpoints);
                pieces.iter().for_each(|e| e.collect_breakpoints(out));
            }
        }
    }

    /// Canonical text form in a given dimension. Parsing the output yields
    /// an identical tree.
    pub fn to_canonical(&self, dimension: usize) -> String {
        Printer { dimension, tree: self }.to_string()
    }

    fn is_atomic(&self) -> bool {
        match self {
            ExprTree::Const(c) => *c >= 0.0,
            ExprTree::Var(_)
            | ExprTree::Exp(_)
            | ExprTree::Abs(_)
            | ExprTree::Max(_)
            | ExprTree::Piecewise { .. } => true,
            _ => false,
        }
    }
}

pub(crate) fn active_piece(breakpoints: &[f64], x: f64) -> usize {
    breakpoints.partition_point(|&c| c <= x)
}

struct Printer<'a> {
    dimension: usize,
    tree: &'a ExprTree,
}

impl Printer<'_> {
    fn child<'b>(&self, tree: &'b ExprTree) -> Printer<'b> {
        Printer {
            dimension: self.dimension,
            tree,
        }
    }

    fn wrapped(&self, f: &mut fmt::Formatter<'_>, tree: &ExprTree) -> fmt::Result {
        if tree.is_atomic() {
            write!(f, "{}", self.child(tree))
        } else {
            write!(f, "({})", self.child(tree))
        }
    }

    fn list(&self, f: &mut fmt::Formatter<'_>, items: &[ExprTree]) -> fmt::Result {
        for (i, e) in items.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", self.child(e))?;
        }
        Ok(())
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tree {
            ExprTree::Const(c) => write!(f, "{c}"),
            ExprTree::Var(i) if self.dimension == 1 && *i == 0 => f.write_str("x"),
            ExprTree::Var(i) => write!(f, "x{}", i + 1),
            ExprTree::Sum(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    match t {
                        ExprTree::Sum(_) => self.wrapped(f, t)?,
                        _ => write!(f, "{}", self.child(t))?,
                    }
                }
                Ok(())
            }
            ExprTree::Scale(c, e) => {
                write!(f, "{c}*")?;
                self.wrapped(f, e)
            }
            ExprTree::Pow(e, k) => {
                self.wrapped(f, e)?;
                write!(f, "^{k}")
            }
            ExprTree::Exp(e) => write!(f, "exp({})", self.child(e)),
            ExprTree::Abs(e) => write!(f, "abs({})", self.child(e)),
            ExprTree::Max(args) => {
                f.write_str("max(")?;
                self.list(f, args)?;
                f.write_str(")")
            }
            ExprTree::Piecewise { breakpoints, pieces } => {
                f.write_str("piecewise(")?;
                for (i, piece) in pieces.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    if i < breakpoints.len() {
                        write!(f, "x<{}: ", breakpoints[i])?;
                    } else {
                        write!(f, "x>={}: ", breakpoints[i - 1])?;
                    }
                    write!(f, "{}", self.child(piece))?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> ExprTree {
        ExprTree::Var(0)
    }

    #[test]
    fn abs_directional_derivatives_at_zero() {
        let t = ExprTree::Abs(Box::new(x()));
        assert_eq!(t.eval_directional(&[0.0], &[1.0]), (0.0, 1.0));
        assert_eq!(t.eval_directional(&[0.0], &[-1.0]), (0.0, 1.0));
        assert_eq!(t.eval_directional(&[-2.0], &[1.0]), (2.0, -1.0));
    }

    #[test]
    fn max_picks_largest_active_slope() {
        // max(x, -x) at 0
        let t = ExprTree::Max(vec![x(), ExprTree::Scale(-1.0, Box::new(x()))]);
        assert_eq!(t.eval_directional(&[0.0], &[1.0]).1, 1.0);
        assert_eq!(t.eval_directional(&[0.0], &[-1.0]).1, 1.0);
    }

    #[test]
    fn piecewise_switches_branch_by_direction() {
        // x<0: -x, else 2x
        let t = ExprTree::Piecewise {
            breakpoints: vec![0.0],
            pieces: vec![
                ExprTree::Scale(-1.0, Box::new(x())),
                ExprTree::Scale(2.0, Box::new(x())),
            ],
        };
        assert_eq!(t.eval_directional(&[0.0], &[1.0]).1, 2.0);
        assert_eq!(t.eval_directional(&[0.0], &[-1.0]).1, 1.0);
        assert_eq!(t.eval(&[-3.0]), 3.0);
    }

    #[test]
    fn printer_uses_plain_x_in_one_dimension() {
        let t = ExprTree::Sum(vec![
            ExprTree::Pow(Box::new(x()), 2),
            ExprTree::Const(-1.0),
        ]);
        assert_eq!(t.to_canonical(1), "x^2 + -1");
        assert_eq!(ExprTree::Var(1).to_canonical(2), "x2");
    }
}
