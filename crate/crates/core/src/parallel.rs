//! Data-parallel drivers over independent runs.
//!
//! Every driver returns results in input order whichever [`Execution`] is
//! chosen, and each run is a pure function of its inputs, so parallel and
//! sequential output are bit-identical. Without the `parallel` feature,
//! [`Execution::Parallel`] runs sequentially.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::problems::bender::solve_bender;
use crate::problems::corpus::ProblemSpec;
use crate::problems::double_range::{
    double_range_integral, reference_grid, DoubleRangeOutcome, DoubleRangeSpec, GridPoint,
};
use crate::propagator::{Propagation, ToleranceConfig};
use crate::solution::SolutionFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// True when this build can actually run work on several threads.
    pub fn is_threaded(self) -> bool {
        self == Execution::Parallel && cfg!(feature = "parallel")
    }
}

/// Queries per chunk in [`eval_many`]; each chunk keeps its own reader so
/// sorted queries still hit the cached element.
const EVAL_CHUNK: usize = 4096;

/// `items.iter().map(f)`, possibly spread over threads, in input order.
pub fn map_ordered<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Solves each problem; results follow the order of `problems`.
pub fn run_suite(
    problems: &[ProblemSpec],
    config: &ToleranceConfig,
    exec: Execution,
) -> Vec<Result<Propagation>> {
    map_ordered(problems, exec, |p| p.solve(config))
}

/// One run of the `cos(πxy)` equation per starting value.
pub fn bender_sweep(
    y0s: &[f64],
    x_max: f64,
    config: &ToleranceConfig,
    exec: Execution,
) -> Vec<Result<Propagation>> {
    map_ordered(y0s, exec, |&y0| solve_bender(y0, x_max, config))
}

/// All nine points of the reference β grid, row-major in `β₁`.
pub fn grid_sweep(
    config: &ToleranceConfig,
    exec: Execution,
) -> Vec<(GridPoint, Result<DoubleRangeOutcome>)> {
    let grid = reference_grid();
    let outcomes = map_ordered(&grid, exec, |g| {
        double_range_integral(&DoubleRangeSpec::reference_family(g.beta1, g.beta2), config)
    });
    grid.into_iter().zip(outcomes).collect()
}

/// `y(x)` for every `x`; fails on the first point outside the domain.
pub fn eval_many(solution: &SolutionFunction, xs: &[f64], exec: Execution) -> Result<Vec<f64>> {
    let chunks: Vec<&[f64]> = xs.chunks(EVAL_CHUNK).collect();
    let parts = map_ordered(&chunks, exec, |chunk| {
        let mut reader = solution.reader();
        chunk
            .iter()
            .map(|&x| reader.eval(x))
            .collect::<Result<Vec<f64>>>()
    });
    let mut out = Vec::with_capacity(xs.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}
