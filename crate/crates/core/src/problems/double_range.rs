//! Double-range integrals
//!
//! ```text
//! I = ∫_0^∞ dy e^{−α₁y} y^{μ₁} î_{λ₁}(β₁y) ∫_y^∞ dx e^{−α₂x} x^{μ₂} k̂_{λ₂}(β₂x)
//! ```
//!
//! evaluated with the order of integration switched,
//! `I = ∫_0^∞ dx g(x) J(x)` with `J(x) = ∫_0^x f(y) dy`. `J` is propagated
//! once to convergence and then read as a function by the outer integral.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::bessel::{bessel_ihat_scaled, bessel_khat_scaled, MAX_ORDER};
use crate::propagator::{propagate, Propagation, RunStats, ToleranceConfig, Upper};
use crate::solution::SolutionFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleRangeSpec {
    pub lambda1: i32,
    pub mu1: i32,
    pub alpha1: f64,
    pub beta1: f64,
    pub lambda2: i32,
    pub mu2: i32,
    pub alpha2: f64,
    pub beta2: f64,
}

/// Exponent `p` with `k̂_λ(z) ~ z^p` as `z → 0`.
fn khat_small_power(lambda: i32) -> i32 {
    let n = if lambda >= 0 { lambda } else { -lambda - 1 };
    -n - 1
}

impl DoubleRangeSpec {
    /// `λ₁ = −11, μ₁ = 12, λ₂ = −13, μ₂ = 14, α = 2β`.
    pub fn reference_family(beta1: f64, beta2: f64) -> Self {
        Self {
            lambda1: -11,
            mu1: 12,
            alpha1: 2.0 * beta1,
            beta1,
            lambda2: -13,
            mu2: 14,
            alpha2: 2.0 * beta2,
            beta2,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Checks that both integrals converge at both ends.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("beta1", self.beta1),
            ("alpha2", self.alpha2),
            ("beta2", self.beta2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a positive real, got {v}"));
            }
        }
        for (name, l) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if l.abs() > MAX_ORDER {
                return bad(format!("{name} = {l} outside [-{MAX_ORDER}, {MAX_ORDER}]"));
            }
        }
        // î_λ(z) ~ z^λ near 0 for every integer λ
        let inner_power = self.mu1 + self.lambda1;
        if inner_power <= -1 {
            return bad(format!(
                "inner integrand behaves as y^{inner_power} at the origin and diverges"
            ));
        }
        if !(self.alpha1 > self.beta1) {
            return bad("inner integral needs alpha1 > beta1 to converge at infinity".into());
        }
        let outer_power = self.mu2 + khat_small_power(self.lambda2) + inner_power + 1;
        if outer_power <= -1 {
            return bad(format!(
                "outer integrand behaves as x^{outer_power} at the origin and diverges"
            ));
        }
        Ok(())
    }

    /// `e^{−α₁y} y^{μ₁} î_{λ₁}(β₁y)`.
    pub fn inner_integrand(&self, y: f64) -> f64 {
        let z = self.beta1 * y;
        match bessel_ihat_scaled(self.lambda1, z) {
            Ok(s) => y.powi(self.mu1) * ((self.beta1 - self.alpha1) * y).exp() * s,
            Err(_) => f64::NAN,
        }
    }

    /// `e^{−α₂x} x^{μ₂} k̂_{λ₂}(β₂x)`.
    pub fn outer_weight(&self, x: f64) -> f64 {
        let z = self.beta2 * x;
        match bessel_khat_scaled(self.lambda2, z) {
            Ok(s) => x.powi(self.mu2) * (-(self.alpha2 + self.beta2) * x).exp() * s,
            Err(_) => f64::NAN,
        }
    }
}

fn open_config(base: &ToleranceConfig) -> ToleranceConfig {
    ToleranceConfig {
        singular_start: true,
        ..base.clone()
    }
}

/// Propagates `J(x) = ∫_0^x f(y) dy` from the origin until it converges; the
/// returned solution is constant beyond its last element.
pub fn inner_integral<F: Fn(f64) -> f64>(f: F, config: &ToleranceConfig) -> Result<Propagation> {
    propagate(f, 0.0, 0.0, Upper::OPEN, &open_config(config))
}

/// Factor by which `J` is built tighter than the outer integral. The outer
/// integral reads `J` between its nodes, where the piecewise polynomial is
/// far less accurate than at element ends.
pub const INNER_TIGHTENING: f64 = 10.0;

pub fn inner_config(base: &ToleranceConfig) -> ToleranceConfig {
    ToleranceConfig {
        delta_rel: base.delta_rel / INNER_TIGHTENING,
        ..base.clone()
    }
}

/// `J` for `spec`, built with [`inner_config`].
pub fn inner_integral_j(spec: &DoubleRangeSpec, config: &ToleranceConfig) -> Result<Propagation> {
    spec.validate()?;
    inner_integral(|y| spec.inner_integrand(y), &inner_config(config))
}

/// `∫_0^∞ g(x) J(x) dx` for a converged `J`.
pub fn outer_integral<G: Fn(f64) -> f64>(
    g: G,
    j: &SolutionFunction,
    config: &ToleranceConfig,
) -> Result<Propagation> {
    if j.tail().is_none() {
        return Err(Error::InvalidInput(
            "inner solution has no converged tail; it cannot be read beyond its range".into(),
        ));
    }
    let reader = RefCell::new(j.reader());
    let integrand = |x: f64| match reader.borrow_mut().eval(x) {
        Ok(jx) => g(x) * jx,
        Err(_) => f64::NAN,
    };
    propagate(integrand, 0.0, 0.0, Upper::OPEN, &open_config(config))
}

#[derive(Debug, Clone)]
pub struct DoubleRangeOutcome {
    pub value: f64,
    pub inner: SolutionFunction,
    /// `None` when `J` was supplied rather than built.
    pub inner_stats: Option<RunStats>,
    pub outer: Propagation,
}

impl DoubleRangeOutcome {
    pub fn inner_evaluations(&self) -> u64 {
        self.inner_stats.as_ref().map_or(0, |s| s.evaluations)
    }
}

pub fn double_range_integral(
    spec: &DoubleRangeSpec,
    config: &ToleranceConfig,
) -> Result<DoubleRangeOutcome> {
    let inner = inner_integral_j(spec, config)?;
    let mut out = double_range_with_inner(spec, inner.solution, config)?;
    out.inner_stats = Some(inner.stats);
    Ok(out)
}

/// Outer integral only, reading a previously built `J`.
pub fn double_range_with_inner(
    spec: &DoubleRangeSpec,
    inner: SolutionFunction,
    config: &ToleranceConfig,
) -> Result<DoubleRangeOutcome> {
    spec.validate()?;
    let outer = outer_integral(|x| spec.outer_weight(x), &inner, config)?;
    Ok(DoubleRangeOutcome {
        value: outer.value(),
        inner,
        inner_stats: None,
        outer,
    })
}

/// One point of the β grid with its high-precision value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub beta1: f64,
    pub beta2: f64,
    pub exact: f64,
}

/// Reference values for [`DoubleRangeSpec::reference_family`] over
/// `β₁, β₂ ∈ {0.5, 1, 2}`.
#[allow(clippy::excessive_precision)]
pub fn reference_grid() -> Vec<GridPoint> {
    const EXACT: [[f64; 3]; 3] = [
        [
            1.627_473_168_386_653_87e27,
            2.559_085_779_949_794_01e22,
            3.103_777_873_917_210_86e17,
        ],
        [
            2.946_389_365_576_741_23e23,
            6.062_810_005_197_874_73e18,
            9.533_337_428_978_808_27e13,
        ],
        [
            4.342_544_722_241_718_83e19,
            1.097_615_571_907_438_80e15,
            2.258_572_729_378_146_95e10,
        ],
    ];
    let betas = [0.5, 1.0, 2.0];
    let mut grid = Vec::with_capacity(9);
    for (i, &beta1) in betas.iter().enumerate() {
        for (k, &beta2) in betas.iter().enumerate() {
            grid.push(GridPoint {
                beta1,
                beta2,
                exact: EXACT[i][k],
            });
        }
    }
    grid
}
