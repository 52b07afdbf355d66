//! Element-by-element propagation of `dy/dx = f(x, y)` from `y(a) = y_a`.
//!
//! Each element `[x_i, x_i + 2q]` is mapped to `τ ∈ [−1, 1]` and carries
//!
//! ```text
//! ȳ(τ) = Σ u_μ(τ) B_μ + s_0(τ) q f(x_i) + y(x_i)
//! ```
//!
//! The coefficients come from collocating `dȳ/dτ = q f̄(τ)` at the
//! Gauss–Legendre nodes. An element is accepted when the slope it predicts
//! at its right edge, `2B_0/q + f(x_i)`, matches a direct evaluation of
//! `f(x_{i+1})` within `|f(x_{i+1})|·δ_rel + δ_abs`; otherwise `q` is halved
//! and the element re-solved. After acceptance the next half-width is
//! predicted from the first four derivatives of `y` at the element end.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::{self, legendre_derivative_at_one};
use crate::collocation::CollocationSystem;
use crate::error::{Error, Result};
use crate::solution::SolutionFunction;

/// Right-hand side of the initial value problem.
pub trait Integrand {
    fn eval(&self, x: f64, y: f64) -> f64;

    /// Whether `f` reads `y`. When it does, each element is solved by
    /// fixed-point iteration on its coefficients.
    fn depends_on_y(&self) -> bool {
        false
    }
}

impl<F: Fn(f64) -> f64> Integrand for F {
    fn eval(&self, x: f64, _y: f64) -> f64 {
        self(x)
    }
}

/// Wraps an `f(x, y)` closure.
#[derive(Debug, Clone, Copy)]
pub struct Nonlinear<F>(pub F);

impl<F: Fn(f64, f64) -> f64> Integrand for Nonlinear<F> {
    fn eval(&self, x: f64, y: f64) -> f64 {
        (self.0)(x, y)
    }

    fn depends_on_y(&self) -> bool {
        true
    }
}

/// Default relative tolerance on the integrand at element ends.
pub const DEFAULT_DELTA_REL: f64 = 2.22e-4;
pub const DEFAULT_DELTA_ABS: f64 = 2.22e-19;

/// Which elements a run keeps in its returned solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Retention {
    All,
    /// Keep only the final element; for very long runs whose interior is
    /// not needed.
    LastOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub delta_rel: f64,
    pub delta_abs: f64,
    /// Width `2q_1` of the first element.
    pub first_step: f64,
    /// Number of basis functions.
    pub m: usize,
    pub max_bisections: usize,
    pub max_elements: usize,
    pub step_safety: f64,
    /// Cap on `q_{i+1}/q_i`.
    pub max_growth: f64,
    /// Relative change of `f` the step predictor aims for over one element.
    /// `None` derives it from `delta_rel` (see [`ToleranceConfig::step_target`]).
    pub step_target: Option<f64>,
    /// Open ranges stop once `y` moved by at most `open_tol·|y|` over the
    /// last `open_window` elements.
    pub open_tol: f64,
    pub open_window: usize,
    /// Start with the `s`-only expansion so `f(a)` is never evaluated.
    pub singular_start: bool,
    /// Fixed-point tolerance on `‖ΔB‖_∞ / max(1, ‖B‖_∞)` for `f(x, y)`.
    pub tol_iter: f64,
    pub max_iter: usize,
    pub retention: Retention,
    pub record_steps: bool,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            delta_rel: DEFAULT_DELTA_REL,
            delta_abs: DEFAULT_DELTA_ABS,
            first_step: 0.5,
            m: 13,
            max_bisections: 60,
            max_elements: 10_000_000,
            step_safety: 0.9,
            max_growth: 4.0,
            step_target: None,
            open_tol: 1e-15,
            open_window: 5,
            singular_start: false,
            tol_iter: 1e-14,
            max_iter: 200,
            retention: Retention::All,
            record_steps: false,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Configuration(msg));
        if !(self.delta_rel > 0.0) {
            return bad(format!("delta_rel must be > 0, got {}", self.delta_rel));
        }
        if !(self.delta_abs >= 0.0) {
            return bad(format!("delta_abs must be >= 0, got {}", self.delta_abs));
        }
        if !(self.first_step > 0.0 && self.first_step.is_finite()) {
            return bad(format!("first_step must be > 0, got {}", self.first_step));
        }
        if self.m < 4 || self.m > crate::collocation::MAX_SIZE {
            return bad(format!("basis size M = {} outside [4, 64]", self.m));
        }
        if self.max_bisections < 1 || self.max_elements < 1 || self.max_iter < 1 {
            return bad("iteration caps must be >= 1".into());
        }
        if !(self.step_safety > 0.0 && self.step_safety <= 1.0) {
            return bad(format!(
                "step_safety must be in (0, 1], got {}",
                self.step_safety
            ));
        }
        if !(self.max_growth >= 1.0) {
            return bad(format!("max_growth must be >= 1, got {}", self.max_growth));
        }
        if let Some(t) = self.step_target {
            if !(t > 0.0) {
                return bad(format!("step_target must be > 0, got {t}"));
            }
        }
        if !(self.open_tol >= 0.0) || self.open_window < 1 {
            return bad("open-range convergence settings invalid".into());
        }
        Ok(())
    }

    /// Relative change of `f` the step predictor aims for. Equals 1 at the
    /// default `delta_rel` and scales as `delta_rel^{1/M}`, the rate at which
    /// a degree `M−1` interpolant gains accuracy when the element shrinks.
    pub fn step_target(&self) -> f64 {
        self.step_target
            .unwrap_or_else(|| (self.delta_rel / DEFAULT_DELTA_REL).powf(1.0 / self.m as f64))
    }

    /// Smallest element width allowed at `x`, and never below
    /// `ε·first_step`. Narrower elements would place their outermost nodes on
    /// the same floating-point values as their edges, so the collocation
    /// data would be quantization noise.
    pub fn min_width(&self, x: f64) -> f64 {
        let ax = x.abs();
        let ulp = ax.next_up() - ax;
        (ulp * node_resolution_factor(self.m)).max(f64::EPSILON * self.first_step)
    }
}

/// `2/(1 + τ_1)` for the smallest node `τ_1`: element width, in units of
/// the local spacing of doubles, at which that node separates from the left
/// edge. Uses `τ_1 ≈ −cos(j_{0,1}/(M + ½))`.
fn node_resolution_factor(m: usize) -> f64 {
    const J01: f64 = 2.404_825_557_695_773;
    let theta = J01 / (m as f64 + 0.5);
    2.0 / (1.0 - theta.cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `ȳ = Σ u_μ B_μ + s_0 q f(x_i) + y(x_i)`.
    Standard,
    /// `ȳ = Σ s_μ B_μ + y(x_i)`; needs `f` at neither edge. Used for a first
    /// element starting on a singularity and for a last element ending on
    /// one.
    SingularStart,
}

/// One solved element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub x_left: f64,
    pub q: f64,
    #[serde(rename = "B")]
    pub coeffs: Vec<f64>,
    /// `f(x_left)`; zero for singular-start elements, which never use it.
    pub f_left: f64,
    pub y_left: f64,
    pub variant: Variant,
}

impl Element {
    pub fn x_right(&self) -> f64 {
        self.x_left + 2.0 * self.q
    }

    pub fn tau_of(&self, x: f64) -> f64 {
        ((x - self.x_left) / self.q - 1.0).clamp(-1.0, 1.0)
    }

    /// `y` at the right edge, in closed form.
    pub fn end_value(&self) -> f64 {
        let b0 = self.coeffs[0];
        match self.variant {
            Variant::Standard => {
                let b1 = self.coeffs.get(1).copied().unwrap_or(0.0);
                2.0 * b0 - (2.0 / 3.0) * b1 + 2.0 * self.q * self.f_left + self.y_left
            }
            Variant::SingularStart => 2.0 * b0 + self.y_left,
        }
    }

    /// `dy/dx` predicted at the right edge.
    pub fn end_slope(&self) -> f64 {
        match self.variant {
            Variant::Standard => 2.0 * self.coeffs[0] / self.q + self.f_left,
            Variant::SingularStart => self.coeffs.iter().sum::<f64>() / self.q,
        }
    }

    pub fn value_at_tau(&self, tau: f64) -> f64 {
        if tau >= 1.0 {
            return self.end_value();
        }
        if tau <= -1.0 {
            return self.y_left;
        }
        match self.variant {
            Variant::Standard => {
                basis::sum_u(&self.coeffs, tau) + (tau + 1.0) * self.q * self.f_left + self.y_left
            }
            Variant::SingularStart => basis::sum_s(&self.coeffs, tau) + self.y_left,
        }
    }

    pub fn slope_at_tau(&self, tau: f64) -> f64 {
        match self.variant {
            Variant::Standard => {
                if tau <= -1.0 {
                    return self.f_left;
                }
                basis::sum_s(&self.coeffs, tau) / self.q + self.f_left
            }
            Variant::SingularStart => basis::sum_p(&self.coeffs, tau) / self.q,
        }
    }

    /// `d^k y / dx^k` at the right edge for `k = 1..=4`.
    pub fn end_derivatives(&self) -> [f64; 4] {
        let q = self.q;
        let tau_derivs = match self.variant {
            Variant::Standard => {
                let (d1, d2, d3, d4) = basis::derivative_values_at_end(&self.coeffs);
                [d1 + q * self.f_left, d2, d3, d4]
            }
            Variant::SingularStart => {
                let mut d = [0.0; 4];
                for (mu, &c) in self.coeffs.iter().enumerate() {
                    for (k, dk) in d.iter_mut().enumerate() {
                        *dk += legendre_derivative_at_one(mu, k) * c;
                    }
                }
                d
            }
        };
        let mut out = [0.0; 4];
        let mut qk = 1.0;
        for k in 0..4 {
            qk *= q;
            out[k] = tau_derivs[k] / qk;
        }
        out
    }
}

/// `|slope predicted at the right edge − f(x_{i+1})|`.
pub fn end_error(element: &Element, f_right: f64) -> f64 {
    (element.end_slope() - f_right).abs()
}

pub fn end_tolerance(f_right: f64, config: &ToleranceConfig) -> f64 {
    f_right.abs() * config.delta_rel + config.delta_abs
}

/// How an element got accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Acceptance {
    /// Passed the end-slope test.
    Tolerance,
    /// Its whole contribution `2q·max|f|` is below the rounding of `y`.
    Negligible,
    /// Could not be halved again without dropping below the resolvable
    /// width; kept as computed.
    ResolutionFloor,
    /// Last sliver before a finite end where `f` cannot be evaluated. Solved
    /// from interior nodes alone, or as `y += (b − x)·f(x)` when even those
    /// fail.
    Closure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub element: Element,
    /// `f(x_{i+1})`, reused as `f_left` of the next element. NaN after a
    /// closure.
    pub f_right: f64,
    pub err: f64,
    pub bisections_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub x_left: f64,
    pub width: f64,
    pub y_right: f64,
    pub err: f64,
    pub tolerance: f64,
    pub bisections: usize,
    pub acceptance: Acceptance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    /// Total integrand evaluations.
    pub evaluations: u64,
    pub elements: usize,
    pub attempts: usize,
    pub bisections: usize,
    pub forced: usize,
    pub fixed_point_iterations: u64,
    pub min_width: f64,
    pub max_width: f64,
    /// Open range: `y` converged. Finite range: the end was reached.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Upper {
    Finite(f64),
    /// Propagate until `y` converges, optionally never past `limit`.
    Open {
        limit: Option<f64>,
    },
}

impl Upper {
    pub const OPEN: Upper = Upper::Open { limit: None };
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub solution: SolutionFunction,
    pub stats: RunStats,
    /// Per-element records, when `record_steps` is set.
    pub steps: Vec<StepRecord>,
}

impl Propagation {
    pub fn value(&self) -> f64 {
        self.solution.end_value()
    }
}

/// Solves one standard element for an `f` that does not depend on `y`.
pub fn solve_element<F: Integrand>(
    f: F,
    x_left: f64,
    q: f64,
    f_left: f64,
    y_left: f64,
    system: &CollocationSystem,
) -> Result<Element> {
    if !(q > 0.0) {
        return Err(Error::InvalidInput(format!(
            "half-width must be > 0, got {q}"
        )));
    }
    let m = system.size();
    let mut rhs = vec![0.0; m];
    for (r, &tau) in rhs.iter_mut().zip(system.nodes()) {
        let x = x_left + q * (tau + 1.0);
        let v = f.eval(x, y_left);
        if !v.is_finite() {
            return Err(Error::Integrand { x });
        }
        *r = q * (v - f_left);
    }
    let mut coeffs = vec![0.0; m];
    system.solve_into(&rhs, &mut coeffs);
    Ok(Element {
        x_left,
        q,
        coeffs,
        f_left,
        y_left,
        variant: Variant::Standard,
    })
}

/// Solves a singular-start element: `Σ P_μ(τ_ν) B_μ = q f̄(τ_ν)`, never
/// touching `f(a)`.
pub fn solve_first_element_singular<F: Integrand>(
    f: F,
    a: f64,
    q: f64,
    y_a: f64,
    system: &CollocationSystem,
) -> Result<Element> {
    if !(q > 0.0) {
        return Err(Error::InvalidInput(format!(
            "half-width must be > 0, got {q}"
        )));
    }
    let m = system.size();
    let mut rhs = vec![0.0; m];
    for (r, &tau) in rhs.iter_mut().zip(system.nodes()) {
        let x = a + q * (tau + 1.0);
        let v = f.eval(x, y_a);
        if !v.is_finite() {
            return Err(Error::Integrand { x });
        }
        *r = q * v;
    }
    let mut coeffs = vec![0.0; m];
    system.solve_singular_into(&rhs, &mut coeffs);
    Ok(Element {
        x_left: a,
        q,
        coeffs,
        f_left: 0.0,
        y_left: y_a,
        variant: Variant::SingularStart,
    })
}

/// Progress of the fixed-point iteration on one element's coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NonlinearState {
    /// Iterations performed, `σ`.
    pub iteration: usize,
    #[serde(rename = "B")]
    pub current: Vec<f64>,
    pub previous: Vec<f64>,
    /// `f` at the mapped nodes from the last iteration.
    pub f_nodes: Vec<f64>,
}

impl NonlinearState {
    /// `‖B_σ − B_{σ−1}‖_∞ / max(1, ‖B_σ‖_∞)`.
    pub fn relative_change(&self) -> f64 {
        let diff = self
            .current
            .iter()
            .zip(&self.previous)
            .fold(0.0f64, |a, (c, p)| a.max((c - p).abs()));
        let norm = self.current.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        diff / norm.max(1.0)
    }
}

/// Solves one element of `dy/dx = f(x, y)` by fixed-point iteration on `B`,
/// starting from `seed`. Fails with [`Error::Stiffness`] when the iteration
/// does not settle within `config.max_iter` steps or stops contracting.
#[allow(clippy::too_many_arguments)]
pub fn solve_element_nonlinear<F: Integrand>(
    f: F,
    x_left: f64,
    q: f64,
    f_left: f64,
    y_left: f64,
    seed: &[f64],
    config: &ToleranceConfig,
) -> Result<(Element, NonlinearState)> {
    config.validate()?;
    if !(q > 0.0) {
        return Err(Error::InvalidInput(format!(
            "half-width must be > 0, got {q}"
        )));
    }
    let m = config.m;
    if seed.len() != m {
        return Err(Error::InvalidInput(format!(
            "seed has {} entries, expected {m}",
            seed.len()
        )));
    }
    let mut engine = Engine {
        f: Nonlinear(|x: f64, y: f64| f.eval(x, y)),
        config,
        system: CollocationSystem::shared(m)?,
        evaluations: 0,
        fp_iterations: 0,
        rhs: vec![0.0; m],
        f_nodes: vec![0.0; m],
        y_nodes: vec![0.0; m],
        seed: seed.to_vec(),
        state: NonlinearState::default(),
    };
    match engine.attempt(
        x_left,
        x_left + 2.0 * q,
        f_left,
        y_left,
        Variant::Standard,
        true,
    ) {
        Attempt::Solved { element, .. } => Ok((element, engine.state)),
        Attempt::Failed => Err(Error::Stiffness {
            x: x_left,
            q,
            bisections: 0,
        }),
    }
}

/// Smallest positive `h ≤ h_max` with `|c1 h + c2 h² + c3 h³| = target`, or
/// `h_max` when the cubic stays below the target.
fn first_crossing(c1: f64, c2: f64, c3: f64, target: f64, h_max: f64) -> f64 {
    let g = |h: f64| (h * (c1 + h * (c2 + h * c3))).abs() - target;
    if g(h_max) < 0.0 {
        // may still cross earlier when the terms cancel near h_max
        let mut h = h_max;
        let mut crossed = None;
        for _ in 0..48 {
            h *= 0.75;
            if g(h) >= 0.0 {
                crossed = Some(h);
            }
        }
        if crossed.is_none() {
            return h_max;
        }
    }
    // scan up from tiny h to bracket the first crossing
    let mut lo = h_max * 2f64.powi(-60);
    if g(lo) >= 0.0 {
        return lo;
    }
    let mut hi = lo;
    while hi < h_max {
        let next = (hi * 1.25).min(h_max);
        if g(next) >= 0.0 {
            hi = next;
            break;
        }
        lo = next;
        hi = next;
    }
    if g(hi) < 0.0 {
        return h_max;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    lo
}

/// Predicts `q_{i+1}` from the derivatives of `y` at the end of `element`.
///
/// With `D1 = f(x_{i+1})` and `D2..D4` the higher derivatives of `y`, the
/// step `h` is the first positive root of
/// `|D2 h + D3 h²/2 + D4 h³/6| = θ·max(|D1|, |f(x_i)|, δ_abs/δ_rel)`,
/// the point where the cubic Taylor model of `f` has moved by the fraction
/// `θ` (see [`ToleranceConfig::step_target`]). Returns
/// `step_safety·h/2` clamped to `[min_width/2, max_growth·q]`.
pub fn predict_next_step(element: &Element, f_right: f64, config: &ToleranceConfig) -> f64 {
    let q = element.q;
    let q_max = config.max_growth * q;
    let x_end = element.x_right();
    let q_min = 0.5 * config.min_width(x_end);
    let [_, d2, d3, d4] = element.end_derivatives();
    if (d2 == 0.0 && d3 == 0.0 && d4 == 0.0)
        || !(d2.is_finite() && d3.is_finite() && d4.is_finite())
    {
        return q_max.max(q_min);
    }
    let f_left = match element.variant {
        Variant::Standard => element.f_left.abs(),
        Variant::SingularStart => 0.0,
    };
    let floor = config.delta_abs / config.delta_rel;
    let scale = f_right.abs().max(f_left).max(floor);
    let target = config.step_target() * scale;
    let h_max = 2.0 * q_max;
    let h = if target > 0.0 {
        first_crossing(d2, d3 / 2.0, d4 / 6.0, target, h_max)
    } else {
        h_max
    };
    (0.5 * config.step_safety * h).clamp(q_min, q_max.max(q_min))
}

/// Consecutive non-contracting fixed-point steps tolerated before an attempt
/// is abandoned.
const STALL_LIMIT: usize = 3;

enum Attempt {
    Solved {
        element: Element,
        f_right: f64,
        max_abs_f: f64,
    },
    /// Non-finite `f` somewhere, or a fixed-point iteration that did not
    /// settle.
    Failed,
}

struct Engine<'a, F: Integrand> {
    f: F,
    config: &'a ToleranceConfig,
    system: Arc<CollocationSystem>,
    evaluations: u64,
    fp_iterations: u64,
    // scratch
    rhs: Vec<f64>,
    f_nodes: Vec<f64>,
    y_nodes: Vec<f64>,
    seed: Vec<f64>,
    state: NonlinearState,
}

impl<'a, F: Integrand> Engine<'a, F> {
    fn eval(&mut self, x: f64, y: f64) -> f64 {
        self.evaluations += 1;
        self.f.eval(x, y)
    }

    fn attempt(
        &mut self,
        x_left: f64,
        x_right: f64,
        f_left: f64,
        y_left: f64,
        variant: Variant,
        evaluate_end: bool,
    ) -> Attempt {
        let m = self.system.size();
        let q = 0.5 * (x_right - x_left);
        let nonlinear = self.f.depends_on_y();
        let mut coeffs = vec![0.0; m];
        if !nonlinear {
            for nu in 0..m {
                let x = x_left + q * (self.system.nodes()[nu] + 1.0);
                let v = self.eval(x, y_left);
                if !v.is_finite() {
                    return Attempt::Failed;
                }
                self.f_nodes[nu] = v;
            }
            self.fill_rhs(q, f_left, variant);
            self.solve(variant, &mut coeffs);
        } else {
            coeffs.copy_from_slice(&self.seed);
            let mut converged = false;
            let mut prev_diff = f64::INFINITY;
            let mut stalls = 0;
            for iter in 0..self.config.max_iter {
                self.fp_iterations += 1;
                match variant {
                    Variant::Standard => self.system.u_sums_at_nodes(&coeffs, &mut self.y_nodes),
                    Variant::SingularStart => {
                        self.system.s_sums_at_nodes(&coeffs, &mut self.y_nodes)
                    }
                }
                for nu in 0..m {
                    let tau = self.system.nodes()[nu];
                    let x = x_left + q * (tau + 1.0);
                    let mut y = self.y_nodes[nu] + y_left;
                    if variant == Variant::Standard {
                        y += (tau + 1.0) * q * f_left;
                    }
                    let v = self.eval(x, y);
                    if !v.is_finite() {
                        return Attempt::Failed;
                    }
                    self.f_nodes[nu] = v;
                }
                self.fill_rhs(q, f_left, variant);
                let mut next = std::mem::take(&mut self.y_nodes);
                self.solve(variant, &mut next);
                let mut diff: f64 = 0.0;
                let mut norm: f64 = 0.0;
                for (c, n) in coeffs.iter().zip(&next) {
                    diff = diff.max((c - n).abs());
                    norm = norm.max(n.abs());
                }
                self.state.iteration = iter + 1;
                self.state.previous.clone_from(&coeffs);
                self.state.current.clone_from(&next);
                self.state.f_nodes.clone_from(&self.f_nodes);
                coeffs.copy_from_slice(&next);
                self.y_nodes = next;
                if !(diff.is_finite()) {
                    return Attempt::Failed;
                }
                if diff <= self.config.tol_iter * norm.max(1.0) {
                    converged = true;
                    break;
                }
                // a map that stopped contracting will not settle; halve instead
                if iter >= 2 && diff >= prev_diff {
                    stalls += 1;
                    if stalls >= STALL_LIMIT {
                        return Attempt::Failed;
                    }
                } else {
                    stalls = 0;
                }
                prev_diff = diff;
            }
            if !converged {
                return Attempt::Failed;
            }
        }
        let element = Element {
            x_left,
            q,
            coeffs,
            f_left: if variant == Variant::Standard {
                f_left
            } else {
                0.0
            },
            y_left,
            variant,
        };
        let y_right = element.end_value();
        if !y_right.is_finite() {
            return Attempt::Failed;
        }
        let f_right = if evaluate_end {
            self.eval(x_right, y_right)
        } else {
            f64::NAN
        };
        let mut max_abs_f = self
            .f_nodes
            .iter()
            .fold(f_right.abs(), |a, v| a.max(v.abs()));
        if variant == Variant::Standard {
            max_abs_f = max_abs_f.max(f_left.abs());
        }
        Attempt::Solved {
            element,
            f_right,
            max_abs_f,
        }
    }

    fn fill_rhs(&mut self, q: f64, f_left: f64, variant: Variant) {
        match variant {
            Variant::Standard => {
                for (r, v) in self.rhs.iter_mut().zip(&self.f_nodes) {
                    *r = q * (v - f_left);
                }
            }
            Variant::SingularStart => {
                for (r, v) in self.rhs.iter_mut().zip(&self.f_nodes) {
                    *r = q * v;
                }
            }
        }
    }

    fn solve(&self, variant: Variant, out: &mut [f64]) {
        match variant {
            Variant::Standard => self.system.solve_into(&self.rhs, out),
            Variant::SingularStart => self.system.solve_singular_into(&self.rhs, out),
        }
    }
}

/// Propagates `y` from `a` toward `upper`.
///
/// Finite ranges end exactly on `b`. Open ranges end once `y` has converged
/// (the returned solution then carries a constant tail), at the optional
/// hard limit, or with [`Error::NonConvergence`] after `max_elements`.
pub fn propagate<F: Integrand>(
    f: F,
    a: f64,
    y_a: f64,
    upper: Upper,
    config: &ToleranceConfig,
) -> Result<Propagation> {
    config.validate()?;
    if !a.is_finite() || !y_a.is_finite() {
        return Err(Error::InvalidInput(format!(
            "lower limit and initial value must be finite (a = {a}, y_a = {y_a})"
        )));
    }
    let end = match upper {
        Upper::Finite(b) => {
            if !(b.is_finite() && b >= a) {
                return Err(Error::InvalidInput(format!(
                    "upper limit {b} must be finite and >= {a}"
                )));
            }
            Some(b)
        }
        Upper::Open { limit } => {
            if let Some(l) = limit {
                if !(l > a) {
                    return Err(Error::InvalidInput(format!(
                        "hard limit {l} must exceed {a}"
                    )));
                }
            }
            limit
        }
    };
    let open = matches!(upper, Upper::Open { .. });
    let system = CollocationSystem::shared(config.m)?;
    let m = config.m;
    let mut engine = Engine {
        f,
        config,
        system,
        evaluations: 0,
        fp_iterations: 0,
        rhs: vec![0.0; m],
        f_nodes: vec![0.0; m],
        y_nodes: vec![0.0; m],
        seed: vec![1.0; m],
        state: NonlinearState::default(),
    };

    let mut stats = RunStats {
        min_width: f64::INFINITY,
        ..Default::default()
    };
    let mut steps = Vec::new();
    let mut elements: Vec<Element> = Vec::new();
    let mut history: std::collections::VecDeque<f64> = std::collections::VecDeque::new();
    history.push_back(y_a);

    let mut x = a;
    let mut y = y_a;
    let mut first = true;
    let mut f_left = if config.singular_start {
        0.0
    } else {
        let v = engine.eval(a, y_a);
        if !v.is_finite() {
            return Err(Error::Integrand { x: a });
        }
        v
    };
    let mut q = 0.5 * config.first_step;

    let finish = |elements: Vec<Element>, x_end: Option<f64>, tail: Option<f64>| {
        SolutionFunction::from_parts(config.m, elements, x_end, tail)
    };

    if end == Some(a) {
        stats.converged = true;
        stats.min_width = 0.0;
        stats.evaluations = engine.evaluations;
        return Ok(Propagation {
            solution: SolutionFunction::point(a, y_a, config.m),
            stats,
            steps,
        });
    }

    loop {
        let variant = if first && config.singular_start {
            Variant::SingularStart
        } else {
            Variant::Standard
        };
        let mut bisections = 0;
        let (element, f_right, err, tol, acceptance) = loop {
            let mut x_right = x + 2.0 * q;
            let touches_end = match end {
                Some(b) if x_right >= b => {
                    x_right = b;
                    true
                }
                _ => false,
            };
            stats.attempts += 1;
            let attempt = engine.attempt(x, x_right, f_left, y, variant, true);
            let mut finite_candidate = None;
            if let Attempt::Solved {
                element,
                f_right,
                max_abs_f,
            } = attempt
            {
                if f_right.is_finite() {
                    let err = end_error(&element, f_right);
                    let tol = end_tolerance(f_right, config);
                    if err <= tol {
                        break (element, f_right, err, tol, Acceptance::Tolerance);
                    }
                    let width = x_right - x;
                    if y != 0.0 && width * max_abs_f <= f64::EPSILON * y.abs() {
                        break (element, f_right, err, tol, Acceptance::Negligible);
                    }
                    finite_candidate = Some((element, f_right, err, tol));
                }
            }
            let half = 0.5 * (x_right - x);
            let next_width = half;
            let too_small = next_width < config.min_width(x);
            if bisections >= config.max_bisections && !too_small {
                return Err(Error::Stiffness {
                    x,
                    q: half,
                    bisections,
                });
            }
            if too_small {
                if let Some((element, f_right, err, tol)) = finite_candidate {
                    break (element, f_right, err, tol, Acceptance::ResolutionFloor);
                }
                if touches_end {
                    // f is not finite at b: collocate on interior nodes only
                    stats.attempts += 1;
                    let closure =
                        engine.attempt(x, x_right, f_left, y, Variant::SingularStart, false);
                    let element = match closure {
                        Attempt::Solved { element, .. } => element,
                        Attempt::Failed if variant == Variant::Standard => Element {
                            x_left: x,
                            q: 0.5 * (x_right - x),
                            coeffs: vec![0.0; m],
                            f_left,
                            y_left: y,
                            variant,
                        },
                        Attempt::Failed => {
                            return Err(Error::Stiffness {
                                x,
                                q: half,
                                bisections,
                            })
                        }
                    };
                    break (element, f64::NAN, f64::NAN, f64::NAN, Acceptance::Closure);
                }
                return Err(Error::Stiffness {
                    x,
                    q: half,
                    bisections,
                });
            }
            q = 0.5 * half;
            bisections += 1;
            stats.bisections += 1;
        };

        // accept
        let x_right = element.x_right();
        let x_next = match end {
            Some(b) if x_right >= b || acceptance == Acceptance::Closure => b,
            _ => x_right,
        };
        let width = x_next - x;
        stats.elements += 1;
        stats.min_width = stats.min_width.min(width);
        stats.max_width = stats.max_width.max(width);
        if acceptance != Acceptance::Tolerance {
            stats.forced += 1;
        }
        let y_next = element.end_value();
        if config.record_steps {
            steps.push(StepRecord {
                x_left: x,
                width,
                y_right: y_next,
                err,
                tolerance: tol,
                bisections,
                acceptance,
            });
        }
        let predicted = if acceptance == Acceptance::Closure {
            0.0
        } else {
            predict_next_step(&element, f_right, config)
        };
        if engine.f.depends_on_y() {
            engine.seed.copy_from_slice(&element.coeffs);
        }
        match config.retention {
            Retention::All => elements.push(element),
            Retention::LastOnly => {
                elements.clear();
                elements.push(element);
            }
        }
        x = x_next;
        y = y_next;
        f_left = f_right;
        first = false;

        if let Some(b) = end {
            if x >= b {
                stats.converged = !open;
                break;
            }
        }
        if open {
            history.push_back(y);
            if history.len() > config.open_window + 1 {
                history.pop_front();
            }
            if history.len() == config.open_window + 1 {
                let gain = (y - history[0]).abs();
                if gain <= config.open_tol * y.abs() {
                    stats.converged = true;
                    break;
                }
            }
        }
        if stats.elements >= config.max_elements {
            stats.evaluations = engine.evaluations;
            let partial = finish(elements, None, None)?;
            return Err(Error::NonConvergence {
                x,
                elements: stats.elements,
                partial: Box::new(partial),
            });
        }
        q = predicted;
    }

    stats.evaluations = engine.evaluations;
    stats.fixed_point_iterations = engine.fp_iterations;
    let tail = if open && stats.converged {
        Some(y)
    } else {
        None
    };
    let solution = finish(elements, Some(x), tail)?;
    Ok(Propagation {
        solution,
        stats,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys() -> Arc<CollocationSystem> {
        CollocationSystem::shared(13).unwrap()
    }

    #[test]
    fn constant_integrand_has_zero_coefficients() {
        let el = solve_element(|_x: f64| 3.0, 1.0, 0.25, 3.0, 2.0, &sys()).unwrap();
        assert!(el.coeffs.iter().all(|&b| b == 0.0));
        assert_eq!(el.end_value(), 2.0 + 2.0 * 0.25 * 3.0);
        assert_eq!(end_error(&el, 3.0), 0.0);
    }

    #[test]
    fn linear_integrand_is_exact() {
        let el = solve_element(|x: f64| x, 0.0, 0.5, 0.0, 0.0, &sys()).unwrap();
        assert!((el.end_value() - 0.5).abs() < 1e-14);
        assert!(end_error(&el, 1.0) < 1e-12);
    }

    #[test]
    fn nonfinite_node_reports_abscissa() {
        let err = solve_element(
            |x: f64| if x > 0.9 { f64::NAN } else { x },
            0.0,
            0.5,
            0.0,
            0.0,
            &sys(),
        )
        .unwrap_err();
        match err {
            Error::Integrand { x } => assert!(x > 0.9 && x < 1.0),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn singular_start_constant() {
        let el = solve_first_element_singular(|_x: f64| 1.5, 0.0, 0.25, 1.0, &sys()).unwrap();
        assert!((el.coeffs[0] - 0.25 * 1.5).abs() < 1e-15);
        assert!(el.coeffs[1..].iter().all(|b| b.abs() < 1e-15));
        assert!((el.end_value() - (1.0 + 2.0 * 0.25 * 1.5)).abs() < 1e-15);
    }

    #[test]
    fn predictor_degenerate_and_linear_cases() {
        let cfg = ToleranceConfig::default();
        let el = solve_element(|_x: f64| 2.0, 0.0, 0.25, 2.0, 0.0, &sys()).unwrap();
        assert_eq!(predict_next_step(&el, 2.0, &cfg), 1.0);

        // f(x) = 1 + x: D2 = 1, D3 = D4 = 0, so h = θ·max(|D1|, |f_left|)/|D2|
        let el = solve_element(|x: f64| 1.0 + x, 0.0, 0.25, 1.0, 0.0, &sys()).unwrap();
        let f_right = 1.5;
        let expected_h = cfg.step_target() * f_right / 1.0;
        let q = predict_next_step(&el, f_right, &cfg);
        assert!((q - 0.5 * cfg.step_safety * expected_h).abs() < 1e-9, "{q}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = ToleranceConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.m = 3;
        assert!(matches!(cfg.validate(), Err(Error::Configuration(_))));
        let cfg = ToleranceConfig {
            delta_rel: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ToleranceConfig::default();
        assert_eq!(cfg.step_target(), 1.0);
    }

    #[test]
    fn zero_integrand_single_element() {
        let cfg = ToleranceConfig::default();
        let run = propagate(|_x: f64| 0.0, 0.0, 4.0, Upper::Finite(0.4), &cfg).unwrap();
        assert_eq!(run.stats.elements, 1);
        assert_eq!(run.value(), 4.0);
    }
}
