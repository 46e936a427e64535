//! Numerical verification of weighted Hardy-type and geometric-mean
//! (Pólya-Knopp-type) inequalities with variable limits on the quarter plane.
//!
//! The crate computes the weight characterization functionals and the
//! two-sided constant bounds they imply, estimates operator norms on
//! piecewise-constant grid functions, and checks the inequality chains
//! satisfied by explicit extremal test functions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod charf;
pub mod error;
pub mod funcspace;
pub mod nonfinite;
pub mod ops;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod partition;
pub mod quad;
pub mod witness;

pub use error::{Error, Result};
