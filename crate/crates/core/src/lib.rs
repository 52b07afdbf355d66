//! Adaptive spectral finite elements for `dy/dx = f(x, y)` and for definite
//! integrals written in that form.
//!
//! The range is covered by elements on which `y` is expanded in integrated
//! Legendre polynomials with coefficients from collocation at Gauss–Legendre
//! nodes. Each step size is predicted from the derivatives at the previous
//! element end. The result is a [`SolutionFunction`] that can be evaluated
//! anywhere in the range, saved and reloaded.

// `!(x > 0.0)` is written on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod collocation;
pub mod error;
mod lu;
pub mod parallel;
pub mod problems;
pub mod propagator;
pub mod solution;

pub use collocation::CollocationSystem;
pub use error::{Error, Result};
pub use propagator::{
    propagate, Element, Integrand, Nonlinear, Propagation, Retention, RunStats, ToleranceConfig,
    Upper, Variant,
};
pub use solution::{Reader, SolutionFunction};
