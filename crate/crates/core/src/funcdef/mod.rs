//! Small expression language for user-supplied candidate functions.
//!
//! Grammar (LL(1), whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*          one side of every '*' is constant
//! unary  := '-' unary | power
//! power  := atom ('^' integer)?         integer >= 1
//! atom   := number | x | x1..xn | '(' expr ')'
//!         | exp '(' expr ')' | abs '(' expr ')' | max '(' expr (',' expr)* ')'
//!         | piecewise '(' arm (',' arm)* ')'     dimension 1 only
//! arm    := ('x' '<' number | 'x' '>=' number | 'else') ':' expr
//! ```

mod expr;
mod parse;

pub use expr::ExprTree;
pub use parse::parse;

use crate::error::{Error, Result};

/// One-sided slopes at a point where they differ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kink {
    pub at: f64,
    pub left: f64,
    pub right: f64,
}

/// Exact derivative of a one-dimensional expression.
///
/// Evaluation uses forward-mode derivative rules on the tree, so values are
/// exact up to floating-point rounding. `kinks` lists the points in the
/// scanned window where the one-sided derivatives disagree.
#[derive(Debug, Clone)]
pub struct Derivative1d<'a> {
    tree: &'a ExprTree,
    pub kinks: Vec<Kink>,
}

impl Derivative1d<'_> {
    pub fn left(&self, x: f64) -> f64 {
        -self.tree.eval_directional(&[x], &[-1.0]).1
    }

    pub fn right(&self, x: f64) -> f64 {
        self.tree.eval_directional(&[x], &[1.0]).1
    }

    /// Two-sided derivative; errors at a kink.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (l, r) = (self.left(x), self.right(x));
        if slopes_differ(l, r) {
            Err(Error::Kink { point: vec![x] })
        } else {
            Ok(r)
        }
    }
}

pub(crate) fn slopes_differ(left: f64, right: f64) -> bool {
    (right - left).abs() > 1e-12 * (1.0 + left.abs().max(right.abs()))
}

/// Half-width of the window scanned for kinks of parsed expressions.
pub const KINK_WINDOW: f64 = 1e3;
const KINK_SCAN_POINTS: usize = 20_001;

/// Differentiates a one-dimensional tree and locates its kinks.
///
/// Kink candidates are piecewise breakpoints, plus sign changes of every
/// `abs` argument and every pairwise `max` difference found by scanning
/// `[-KINK_WINDOW, KINK_WINDOW]` and bisecting. A candidate is kept only
/// when the one-sided slopes there actually differ.
pub fn derivative_1d(tree: &ExprTree) -> Derivative1d<'_> {
    let mut candidates = tree.breakpoints();
    if tree.may_have_kinks() {
        let mut switches: Vec<Box<dyn Fn(f64) -> f64 + '_>> = Vec::new();
        collect_switches(tree, &mut switches);
        for g in &switches {
            scan_roots(g.as_ref(), &mut candidates);
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let d = Derivative1d {
        tree,
        kinks: Vec::new(),
    };
    let kinks = candidates
        .into_iter()
        .filter_map(|c| {
            let (left, right) = (d.left(c), d.right(c));
            slopes_differ(left, right).then_some(Kink { at: c, left, right })
        })
        .collect();
    Derivative1d { tree, kinks }
}

fn collect_switches<'a>(tree: &'a ExprTree, out: &mut Vec<Box<dyn Fn(f64) -> f64 + 'a>>) {
    match tree {
        ExprTree::Const(_) | ExprTree::Var(_) => {}
        ExprTree::Abs(e) => {
            out.push(Box::new(move |x| e.eval(&[x])));
            collect_switches(e, out);
        }
        ExprTree::Max(args) => {
            for i in 0..args.len() {
                for j in i + 1..args.len() {
                    let (a, b) = (&args[i], &args[j]);
                    out.push(Box::new(move |x| a.eval(&[x]) - b.eval(&[x])));
                }
            }
            args.iter().for_each(|a| collect_switches(a, out));
        }
        ExprTree::Scale(_, e) | ExprTree::Pow(e, _) | ExprTree::Exp(e) => collect_switches(e, out),
        ExprTree::Sum(v) => v.iter().for_each(|e| collect_switches(e, out)),
        ExprTree::Piecewise { pieces, .. } => pieces.iter().for_each(|e| collect_switches(e, out)),
    }
}

fn scan_roots(g: &dyn Fn(f64) -> f64, out: &mut Vec<f64>) {
    let step = 2.0 * KINK_WINDOW / (KINK_SCAN_POINTS - 1) as f64;
    let mut prev_x = -KINK_WINDOW;
    let mut prev = g(prev_x);
    for i in 1..KINK_SCAN_POINTS {
        let x = -KINK_WINDOW + step * i as f64;
        let v = g(x);
        if prev == 0.0 {
            out.push(prev_x);
        } else if v != 0.0 && (prev < 0.0) != (v < 0.0) {
            out.push(bisect_sign_change(g, prev_x, x, prev));
        }
        prev_x = x;
        prev = v;
    }
    if prev == 0.0 {
        out.push(prev_x);
    }
}

fn bisect_sign_change(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, g_lo: f64) -> f64 {
    let lo_negative = g_lo < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // prefer an endpoint where the switching function vanishes exactly
    if g(hi) == 0.0 {
        hi
    } else {
        lo
    }
}
