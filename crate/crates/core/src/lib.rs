//! Bregman sections and engulfing checks for convex functions.
//!
//! A convex φ is described by a [`FunctionSpec`] (a builtin from the catalog
//! or a parsed expression). From it the crate computes Bregman gaps, the
//! sections S(x, p, t) = {y : D(y; x, p) < t}, the quasi-symmetry constant
//! and sampled soft/full engulfing verdicts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bregman;
pub mod engulfing;
pub mod error;
pub mod funcdef;
pub mod oracle;
pub mod par;
pub mod plot;
pub mod report;
pub mod sampling;
pub mod sections;

pub use engulfing::{check_full, check_soft, estimate_k_char, EngulfingVerdict, KEstimate, Mode};
pub use error::{Error, Result};
pub use oracle::{Catalog, FunctionSpec, Point, SubgradientPair};
pub use report::ExperimentReport;
pub use sampling::{RefineConfig, SamplerConfig};
