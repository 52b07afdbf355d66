//! Problems solved with the propagator: a corpus of definite integrals, the
//! nonlinear `y' = cos(πxy)` equation and double-range integrals over
//! spherical modified Bessel functions.

pub mod bender;
pub mod bessel;
pub mod corpus;
pub mod double_range;

pub use crate::propagator::{solve_element_nonlinear, NonlinearState};
pub use bender::{bender_config, solve_bender, BenderSummary};
pub use bessel::{bessel_ihat, bessel_ihat_scaled, bessel_khat, bessel_khat_scaled};
pub use corpus::{corpus, problem_by_id, ProblemSpec, Range, Smoothness};
pub use double_range::{
    double_range_integral, inner_config, inner_integral_j, DoubleRangeOutcome, DoubleRangeSpec,
};

/// Looks a corpus problem up by numeric id or by name.
pub fn find_problem(key: &str) -> Option<ProblemSpec> {
    match key.parse::<u32>() {
        Ok(id) => problem_by_id(id),
        Err(_) => corpus()
            .into_iter()
            .find(|p| p.name.eq_ignore_ascii_case(key)),
    }
}
