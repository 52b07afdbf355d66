//! `dy/dx = cos(πxy)`, `y(0) = y0`: oscillatory near the origin, then
//! settling into one of a discrete bundle of slowly decaying branches.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::propagator::{propagate, Nonlinear, Propagation, ToleranceConfig, Upper};

pub const BENDER_DELTA_REL: f64 = 3.0e-9;

/// Reference `y(24)` for `y0 = 1, …, 10` at `δ_rel = 3e-9`.
pub const REFERENCE_Y24: [f64; 10] = [
    0.020_844_865_419_015_3,
    0.104_224_327_270_128,
    0.270_983_253_633_302,
    0.437_742_187_280_245,
    0.687_880_611_222_152,
    0.938_019_076_811_230,
    1.271_537_122_002_93,
    1.688_434_875_810_57,
    2.105_332_915_403_23,
    2.605_611_041_676_66,
];

/// Absolute agreement expected with [`REFERENCE_Y24`].
pub const REFERENCE_TOLERANCE: f64 = 1e-8;

pub fn reference_y24(y0: f64) -> Option<f64> {
    let n = y0 as usize;
    (n as f64 == y0 && (1..=10).contains(&n)).then(|| REFERENCE_Y24[n - 1])
}

pub fn bender_rhs(x: f64, y: f64) -> f64 {
    (PI * x * y).cos()
}

/// Defaults for this equation: `δ_rel = 3e-9` over `base`.
pub fn bender_config(base: &ToleranceConfig) -> ToleranceConfig {
    ToleranceConfig {
        delta_rel: BENDER_DELTA_REL,
        ..base.clone()
    }
}

pub fn solve_bender(y0: f64, x_max: f64, config: &ToleranceConfig) -> Result<Propagation> {
    if !(x_max > 0.0) || !x_max.is_finite() {
        return Err(crate::Error::InvalidInput(format!(
            "x_max must be > 0, got {x_max}"
        )));
    }
    propagate(Nonlinear(bender_rhs), 0.0, y0, Upper::Finite(x_max), config)
}

/// Per-run figures: end value, element count, mean step and mean
/// evaluations per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenderSummary {
    pub y0: f64,
    pub x_max: f64,
    pub y_end: f64,
    pub elements: usize,
    pub evaluations: u64,
    pub average_step: f64,
    pub average_evaluations: f64,
}

impl BenderSummary {
    pub fn from_run(y0: f64, x_max: f64, run: &Propagation) -> Self {
        let n = run.stats.elements.max(1) as f64;
        Self {
            y0,
            x_max,
            y_end: run.value(),
            elements: run.stats.elements,
            evaluations: run.stats.evaluations,
            average_step: x_max / n,
            average_evaluations: run.stats.evaluations as f64 / n,
        }
    }
}
