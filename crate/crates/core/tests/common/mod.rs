//! Oracles and property checks shared by the property suites and the
//! acceptance gate. Each check returns `Err` with a diagnostic on failure.

#![allow(dead_code)]

use std::cell::Cell;

use ivp_quad::basis::{clenshaw_sum_s, clenshaw_sum_u, eval_s, eval_u};
use ivp_quad::propagator::Acceptance;
use ivp_quad::{propagate, Propagation, SolutionFunction, ToleranceConfig, Upper};
use nalgebra::{DMatrix, SymmetricEigen};

pub type Check = std::result::Result<(), String>;

/// Gauss–Legendre rule on [−1, 1] from the eigen-decomposition of the
/// Jacobi matrix.
pub fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Bonnet recurrence, kept separate from the library's.
fn p_oracle(mu: usize, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if mu == 0 {
        return 1.0;
    }
    for k in 1..mu {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `s_μ(τ) = ∫_{−1}^{τ} P_μ` and `u_μ(τ) = ∫_{−1}^{τ} (τ − t) P_μ(t) dt` by a
/// 64-point rule, exact for the polynomial degrees involved.
pub fn s_u_oracle(rule: &(Vec<f64>, Vec<f64>), mu: usize, tau: f64) -> (f64, f64) {
    let half = 0.5 * (tau + 1.0);
    let (mut s, mut u) = (0.0, 0.0);
    for (&x, &w) in rule.0.iter().zip(&rule.1) {
        let t = -1.0 + half * (x + 1.0);
        let p = p_oracle(mu, t);
        s += w * p;
        u += w * (tau - t) * p;
    }
    (s * half, u * half)
}

pub fn check_basis_against_oracle(
    rule: &(Vec<f64>, Vec<f64>),
    mu: usize,
    tau: f64,
    coeffs: &[f64],
) -> Check {
    let (s, u) = s_u_oracle(rule, mu, tau);
    let cs = eval_s(mu, tau).map_err(|e| e.to_string())?;
    let cu = eval_u(mu, tau).map_err(|e| e.to_string())?;
    if (cs - s).abs() > 1e-12 || (cu - u).abs() > 1e-12 {
        return Err(format!("μ={mu} τ={tau}: s {cs} vs {s}, u {cu} vs {u}"));
    }
    // series sums against term-by-term oracle sums
    let (mut ss, mut su) = (0.0, 0.0);
    for (k, &c) in coeffs.iter().enumerate() {
        let (sk, uk) = s_u_oracle(rule, k, tau);
        ss += c * sk;
        su += c * uk;
    }
    let scale: f64 = coeffs.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
    let (cs, cu) = (clenshaw_sum_s(coeffs, tau), clenshaw_sum_u(coeffs, tau));
    if (cs - ss).abs() > 1e-12 * scale || (cu - su).abs() > 1e-12 * scale {
        return Err(format!("sums at τ={tau}: s {cs} vs {ss}, u {cu} vs {su}"));
    }
    Ok(())
}

/// Exact values at both ends of the reference interval.
pub fn check_endpoint_identities(mu: usize) -> Check {
    let s_hi = if mu == 0 { 2.0 } else { 0.0 };
    let u_hi = match mu {
        0 => 2.0,
        1 => -2.0 / 3.0,
        _ => 0.0,
    };
    let got = [
        eval_s(mu, -1.0).unwrap(),
        eval_u(mu, -1.0).unwrap(),
        eval_s(mu, 1.0).unwrap(),
        eval_u(mu, 1.0).unwrap(),
    ];
    let want = [0.0, 0.0, s_hi, u_hi];
    if got != want {
        return Err(format!("μ={mu}: got {got:?}, want {want:?}"));
    }
    Ok(())
}

/// Polynomial `Σ c_k x^k` of degree ≤ M − 1 integrated over [0, 10] must be
/// reproduced everywhere in the range.
pub fn check_polynomial_exactness(coeffs: &[f64], config: &ToleranceConfig) -> Check {
    let f = |x: f64| coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
    let antideriv = |x: f64| {
        coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * x + c / (k + 1) as f64)
            * x
    };
    let scale = |x: f64| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.abs() * x.powi(k as i32 + 1) / (k + 1) as f64)
            .sum::<f64>()
            .max(f64::MIN_POSITIVE)
    };
    let run = propagate(f, 0.0, 0.0, Upper::Finite(10.0), config).map_err(|e| e.to_string())?;
    for i in 0..=40 {
        let x = 10.0 * i as f64 / 40.0;
        let got = run.solution.eval(x).map_err(|e| e.to_string())?;
        let err = (got - antideriv(x)).abs();
        if err > 1e-12 * scale(x) {
            return Err(format!("x={x}: {got} vs {}, err {err:e}", antideriv(x)));
        }
    }
    Ok(())
}

/// Value continuity is exact and the slope jump at every boundary of an
/// element accepted by the end-slope test stays within that test's bound.
pub fn check_c1_continuity(run: &Propagation) -> Check {
    let els = run.solution.elements();
    if run.steps.len() != els.len() {
        return Err(format!(
            "{} records for {} elements",
            run.steps.len(),
            els.len()
        ));
    }
    for (i, pair) in els.windows(2).enumerate() {
        let (l, r) = (&pair[0], &pair[1]);
        if l.end_value() != r.y_left {
            return Err(format!(
                "value jump at x={}: {} vs {}",
                r.x_left,
                l.end_value(),
                r.y_left
            ));
        }
        let rec = &run.steps[i];
        if rec.acceptance == Acceptance::Tolerance {
            let jump = (l.end_slope() - r.f_left).abs();
            // the slope is rebuilt from B₀/q, which adds a few ulps of f
            let slack = 8.0 * f64::EPSILON * r.f_left.abs().max(l.end_slope().abs());
            if jump > rec.tolerance + slack {
                return Err(format!(
                    "slope jump {jump:e} at x={} exceeds {:e}",
                    r.x_left, rec.tolerance
                ));
            }
        }
    }
    Ok(())
}

/// Runs `f` through a counting wrapper and compares with the engine total.
pub fn check_evaluation_count<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    upper: Upper,
    config: &ToleranceConfig,
) -> Check {
    let calls = Cell::new(0u64);
    let counted = |x: f64| {
        calls.set(calls.get() + 1);
        f(x)
    };
    let run = propagate(counted, a, 0.0, upper, config).map_err(|e| e.to_string())?;
    if run.stats.evaluations != calls.get() {
        return Err(format!(
            "engine {} vs counted {}",
            run.stats.evaluations,
            calls.get()
        ));
    }
    Ok(())
}

/// Save, reload, save again: identical text and identical evaluations.
pub fn check_dump_round_trip(sol: &SolutionFunction, probes: &[f64]) -> Check {
    let text = sol.to_json().map_err(|e| e.to_string())?;
    let back = SolutionFunction::from_json(&text).map_err(|e| e.to_string())?;
    let again = back.to_json().map_err(|e| e.to_string())?;
    if text != again {
        return Err("re-serialized document differs".into());
    }
    if back.elements() != sol.elements() || back.tail() != sol.tail() {
        return Err("elements differ after reload".into());
    }
    for &x in probes {
        let (a, b) = (sol.eval(x).unwrap(), back.eval(x).unwrap());
        if a.to_bits() != b.to_bits() {
            return Err(format!("y({x}) {a} vs {b}"));
        }
    }
    Ok(())
}
