//! Exact post-selection inference for Gaussian linear models.
//!
//! A selection procedure (lasso, elastic net, marginal screening, OMP,
//! NNLS, ...) is encoded as a set of affine constraints `{A y <= b}` on the
//! response. Conditional on that event, any linear functional `eta' y` is a
//! univariate normal truncated to a region that depends only on the part of
//! `y` orthogonal to `eta`, which yields exact pivots, p-values and
//! confidence intervals.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command-line
//! front end and the Monte Carlo harness live in the `selinf` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod blackbox;
pub mod data;
mod error;
pub mod events;
pub mod inference;
pub mod knockoff;
pub mod linalg;
pub mod lp;
pub mod normal;
pub mod solvers;
pub mod truncnorm;
pub mod variance;

pub use data::{Contrast, Noise, RegressionData, Standardization};
pub use error::{Error, Result};
pub use events::{EventMeta, Method, Polytope, SelectionEvent};
pub use inference::{PivotResult, SelectiveInterval, Side, TruncationResult};
pub use truncnorm::TruncationRegion;

pub use nalgebra::{DMatrix, DVector};

/// Slack allowed when testing `A y <= b`. Strict inequalities of the
/// selection events are realized as non-strict ones with this tolerance.
pub const FEAS_TOL: f64 = 1e-9;

/// Subgradient magnitudes above `1 - ACTIVE_MARGIN` count as active.
pub const ACTIVE_MARGIN: f64 = 1e-8;

/// Largest active set for which sign unions are enumerated.
pub const SIGN_UNION_CAP: usize = 12;
