//! Direct-method solver for odd parabolic-type orbits of the planar
//! two-fixed-center problem with weak-force homogeneous potentials.
//!
//! The truncated action
//!
//! ```text
//! f(q) = ∫_{-n}^{n} ( ½|q̇|² + U(q) ) dt,   U(q) = (1-μ)/|q-q¹|^α + μ/|q-q²|^α
//! ```
//!
//! is discretized over odd piecewise-linear paths (`q(-t) = -q(t)`, free
//! endpoint at `t = n`) and minimized with a preconditioned limited-memory
//! quasi-Newton method. The [`diagnostics`] module then checks the computed
//! minimizers against the analytic estimates: the `a_n ≤ c·n^θ` action bound,
//! energy conservation and its sign, sup-norm growth, the zero-energy
//! kinetic bound and convergence on fixed time windows.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod continuation;
pub mod diagnostics;
pub mod error;
pub mod optimizer;
pub mod problem;
pub mod trajectory;

pub use action::{action, bound_constants, optimal_beta, ActionEvaluation, BoundConstants};
pub use error::{Error, Result};
pub use optimizer::{minimize, MinimizeOptions, MinimizeReport};
pub use problem::{Point, ProblemSpec};
pub use trajectory::{Initializer, OddTrajectory};

/// Schema tag written into every JSON document produced by this crate.
pub const SCHEMA: &str = "parabolic-orbits/1";
