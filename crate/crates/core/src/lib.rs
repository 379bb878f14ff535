//! Numerical laboratory for the modified mean curvature flow (MMCF)
//! u_t = -(H - c) Theta over almost-Fuchsian warped metrics
//! g = dr^2 + (cosh(r) I + sinh(r) A)^2, and for the constant-mean-curvature
//! foliations the flow produces when the target curvature c is swept.
//!
//! Layout mirrors the problem:
//! - [`point_geometry`]: closed-form tensors, curvatures and connection
//!   coefficients at a point (x, r);
//! - [`field_domain`]: discrete base grids carrying shape-sample fields;
//! - [`theta_engine`]: the angle-function evolution scalar, computed two
//!   independent ways (closed Gamma form vs term-by-term assembly);
//! - [`graph_flow`]: the explicit MMCF solver for geodesic graphs, with
//!   height-envelope, mean-convexity and angle monitors;
//! - [`foliation`]: c-sweeps into monotone CMC families with ordering and
//!   separation certificates;
//! - [`config`] / [`harness`]: scenario configs, verify suites, CSV output
//!   and the `mmcf` CLI plumbing.

// Index-form tensor loops and NaN-rejecting negated comparisons are the
// house style for the numerics here.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod field_domain;
pub mod foliation;
pub mod graph_flow;
pub mod harness;
pub mod linalg;
pub mod point_geometry;
pub mod rng;
pub mod theta_engine;

pub use error::{Error, Result};
