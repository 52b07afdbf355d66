//! Fifteen test integrals with known closed-form values, covering smooth,
//! endpoint-singular, oscillatory and infinite-range integrands.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::Serialize;

use crate::error::Result;
use crate::propagator::{propagate, Propagation, ToleranceConfig, Upper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    /// Analytic on the closed range.
    Smooth,
    /// Endpoint singularity, infinite range with slow decay, or similar.
    Singular,
}

impl Smoothness {
    /// Relative error a run is expected to meet.
    pub fn tolerance(self) -> f64 {
        match self {
            Smoothness::Smooth => 1e-12,
            Smoothness::Singular => 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Range {
    Finite { a: f64, b: f64 },
    Open { a: f64 },
}

impl Range {
    pub fn lower(self) -> f64 {
        match self {
            Range::Finite { a, .. } | Range::Open { a } => a,
        }
    }

    pub fn upper(self) -> Upper {
        match self {
            Range::Finite { b, .. } => Upper::Finite(b),
            Range::Open { .. } => Upper::OPEN,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSpec {
    pub id: u32,
    pub name: &'static str,
    /// Integrand and range in plain notation.
    pub formula: &'static str,
    #[serde(skip)]
    pub integrand: fn(f64) -> f64,
    pub range: Range,
    pub reference: f64,
    /// Where `reference` comes from.
    pub provenance: &'static str,
    /// Start without evaluating `f(a)`.
    pub singular_start: bool,
    pub smoothness: Smoothness,
}

impl ProblemSpec {
    pub fn config(&self, base: &ToleranceConfig) -> ToleranceConfig {
        ToleranceConfig {
            singular_start: self.singular_start || base.singular_start,
            ..base.clone()
        }
    }

    pub fn solve(&self, base: &ToleranceConfig) -> Result<Propagation> {
        propagate(
            self.integrand,
            self.range.lower(),
            0.0,
            self.range.upper(),
            &self.config(base),
        )
    }

    /// Exact `∫_a^x f`, for the rows where it has a short closed form.
    pub fn antiderivative(&self) -> Option<fn(f64) -> f64> {
        antiderivative(self.id)
    }

    pub fn relative_error(&self, value: f64) -> f64 {
        (value - self.reference).abs() / self.reference.abs().max(f64::MIN_POSITIVE)
    }
}

/// `π/2 − t` with the low-order part of `π/2` restored, so it stays
/// accurate as `t` approaches `π/2`.
fn pi_2_minus(t: f64) -> f64 {
    const FRAC_PI_2_LO: f64 = 6.123_233_995_736_766e-17;
    (FRAC_PI_2 - t) + FRAC_PI_2_LO
}

fn f1(t: f64) -> f64 {
    t * t.ln_1p()
}
fn f2(t: f64) -> f64 {
    t * t * t.atan()
}
fn f3(t: f64) -> f64 {
    t.exp() * t.cos()
}
fn f4(t: f64) -> f64 {
    let r = (2.0 + t * t).sqrt();
    r.atan() / ((1.0 + t * t) * r)
}
fn f5(t: f64) -> f64 {
    t.sqrt() * t.ln()
}
fn f6(t: f64) -> f64 {
    ((1.0 - t) * (1.0 + t)).sqrt()
}
fn f7(t: f64) -> f64 {
    t.sqrt() / ((1.0 - t) * (1.0 + t)).sqrt()
}
fn f8(t: f64) -> f64 {
    let l = t.ln();
    l * l
}
fn f9(t: f64) -> f64 {
    if t < FRAC_PI_4 {
        t.cos().ln()
    } else {
        // cos t = sin(π/2 − t)
        pi_2_minus(t).sin().ln()
    }
}
fn f10(t: f64) -> f64 {
    if t < FRAC_PI_4 {
        t.tan().sqrt()
    } else {
        // tan t = 1 / tan(π/2 − t)
        (1.0 / pi_2_minus(t).tan()).sqrt()
    }
}
fn f11(t: f64) -> f64 {
    1.0 / (1.0 - 2.0 * t + 2.0 * t * t)
}
fn f12(t: f64) -> f64 {
    (-t).exp() / t.sqrt()
}
fn f13(t: f64) -> f64 {
    (-0.5 * t * t).exp()
}
fn f14(t: f64) -> f64 {
    (-t).exp() * t.cos()
}
fn f15(t: f64) -> f64 {
    1.0 / (1.0 + t * t)
}

fn antiderivative(id: u32) -> Option<fn(f64) -> f64> {
    let f: fn(f64) -> f64 = match id {
        1 => |t| 0.5 * (t - 1.0) * (t + 1.0) * t.ln_1p() - 0.25 * t * t + 0.5 * t,
        3 => |t| 0.5 * (t.exp() * (t.sin() + t.cos()) - 1.0),
        5 => |t| {
            if t == 0.0 {
                0.0
            } else {
                t * t.sqrt() * (2.0 / 3.0 * t.ln() - 4.0 / 9.0)
            }
        },
        6 => |t| 0.5 * (t * ((1.0 - t) * (1.0 + t)).sqrt() + t.asin()),
        8 => |t| {
            if t == 0.0 {
                return 0.0;
            }
            let l = t.ln();
            t * (l * l - 2.0 * l + 2.0)
        },
        11 => |t| (2.0 * t - 1.0).atan() + FRAC_PI_4,
        14 => |t| 0.5 * ((-t).exp() * (t.sin() - t.cos()) + 1.0),
        15 => |t| t.atan(),
        _ => return None,
    };
    Some(f)
}

const UNIT: Range = Range::Finite { a: 0.0, b: 1.0 };
const QUARTER_TURN: Range = Range::Finite {
    a: 0.0,
    b: FRAC_PI_2,
};
const HALF_LINE: Range = Range::Open { a: 0.0 };

/// The fifteen problems, ordered by id.
#[allow(clippy::excessive_precision)]
pub fn corpus() -> Vec<ProblemSpec> {
    use Smoothness::*;
    let p = |id,
             name,
             formula,
             integrand: fn(f64) -> f64,
             range,
             reference,
             provenance,
             singular_start,
             smoothness| {
        ProblemSpec {
            id,
            name,
            formula,
            integrand,
            range,
            reference,
            provenance,
            singular_start,
            smoothness,
        }
    };
    vec![
        p(
            1,
            "t-log1p",
            "∫_0^1 t log(1+t) dt",
            f1,
            UNIT,
            0.25,
            "exact 1/4",
            false,
            Smooth,
        ),
        p(
            2,
            "t2-atan",
            "∫_0^1 t² arctan t dt",
            f2,
            UNIT,
            0.210_657_251_225_806_99,
            "(π − 2 + 2 ln 2)/12",
            false,
            Smooth,
        ),
        p(
            3,
            "exp-cos",
            "∫_0^{π/2} e^t cos t dt",
            f3,
            QUARTER_TURN,
            1.905_238_690_482_675_8,
            "(e^{π/2} − 1)/2",
            false,
            Smooth,
        ),
        p(
            4,
            "ahmed",
            "∫_0^1 arctan√(2+t²) / ((1+t²)√(2+t²)) dt",
            f4,
            UNIT,
            0.514_041_895_890_070_76,
            "5π²/96",
            false,
            Smooth,
        ),
        p(
            5,
            "sqrt-log",
            "∫_0^1 √t log t dt",
            f5,
            UNIT,
            -4.0 / 9.0,
            "exact −4/9",
            true,
            Singular,
        ),
        p(
            6,
            "quarter-circle",
            "∫_0^1 √(1−t²) dt",
            f6,
            UNIT,
            PI / 4.0,
            "π/4",
            false,
            Singular,
        ),
        p(
            7,
            "sqrt-over-circle",
            "∫_0^1 √t / √(1−t²) dt",
            f7,
            UNIT,
            1.198_140_234_735_592_2,
            "2√π Γ(3/4)/Γ(1/4)",
            false,
            Singular,
        ),
        p(
            8,
            "log-squared",
            "∫_0^1 log² t dt",
            f8,
            UNIT,
            2.0,
            "exact 2",
            true,
            Singular,
        ),
        p(
            9,
            "log-cos",
            "∫_0^{π/2} log cos t dt",
            f9,
            QUARTER_TURN,
            -1.088_793_045_151_801,
            "−π ln 2 / 2",
            false,
            Singular,
        ),
        p(
            10,
            "sqrt-tan",
            "∫_0^{π/2} √tan t dt",
            f10,
            QUARTER_TURN,
            2.221_441_469_079_183_1,
            "π√2/2",
            false,
            Singular,
        ),
        p(
            11,
            "mapped-lorentzian",
            "∫_0^1 1/(1 − 2t + 2t²) dt",
            f11,
            UNIT,
            FRAC_PI_2,
            "π/2",
            false,
            Smooth,
        ),
        p(
            12,
            "exp-over-sqrt",
            "∫_0^∞ e^{−t}/√t dt",
            f12,
            HALF_LINE,
            1.772_453_850_905_516,
            "√π",
            true,
            Singular,
        ),
        p(
            13,
            "half-gaussian",
            "∫_0^∞ e^{−t²/2} dt",
            f13,
            HALF_LINE,
            1.253_314_137_315_500_3,
            "√(π/2)",
            false,
            Singular,
        ),
        p(
            14,
            "damped-cos",
            "∫_0^∞ e^{−t} cos t dt",
            f14,
            HALF_LINE,
            0.5,
            "exact 1/2",
            false,
            Smooth,
        ),
        p(
            15,
            "lorentzian",
            "∫_0^∞ 1/(1+t²) dt",
            f15,
            HALF_LINE,
            FRAC_PI_2,
            "π/2",
            false,
            Singular,
        ),
    ]
}

pub fn problem_by_id(id: u32) -> Option<ProblemSpec> {
    corpus().into_iter().find(|p| p.id == id)
}
