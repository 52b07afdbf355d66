mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use common::*;
use ivp_quad::collocation::gauss_legendre_nodes;
use ivp_quad::problems::bender::{bender_config, bender_rhs, solve_bender};
use ivp_quad::problems::bessel::{bessel_ihat_scaled, bessel_khat_scaled};
use ivp_quad::problems::corpus::problem_by_id;
use ivp_quad::problems::double_range::{
    double_range_integral, inner_integral, outer_integral, DoubleRangeSpec,
};
use ivp_quad::{propagate, ToleranceConfig, Upper};
use proptest::prelude::*;

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| golub_welsch(64))
}

fn recorded() -> ToleranceConfig {
    ToleranceConfig {
        record_steps: true,
        ..Default::default()
    }
}

#[test]
fn oracle_rule_integrates_monomials() {
    let (x, w) = rule();
    for k in 0..=40 {
        let got: f64 = x.iter().zip(w).map(|(x, w)| w * x.powi(k)).sum();
        let want = if k % 2 == 0 {
            2.0 / (k + 1) as f64
        } else {
            0.0
        };
        assert!((got - want).abs() < 1e-14, "k={k}");
    }
}

#[test]
fn endpoint_identities_hold_exactly() {
    for mu in 0..64 {
        check_endpoint_identities(mu).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_matches_quadrature(
        mu in 0usize..40,
        tau in -1.0f64..=1.0,
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..20),
    ) {
        check_basis_against_oracle(rule(), mu, tau, &coeffs).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn polynomials_integrate_exactly(coeffs in prop::collection::vec(-1.0f64..1.0, 1..=13)) {
        check_polynomial_exactness(&coeffs, &ToleranceConfig::default())
            .map_err(TestCaseError::fail)?;
    }

    #[test]
    fn slope_is_continuous_within_tolerance(c in 0.5f64..20.0, p in 1.0f64..3.0) {
        let run = propagate(|x: f64| (c * x).sin() + x.powf(p), 0.0, 0.0, Upper::Finite(5.0), &recorded())
            .unwrap();
        check_c1_continuity(&run).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn evaluation_count_is_exact(k in 0.1f64..30.0, singular in any::<bool>()) {
        let cfg = ToleranceConfig { singular_start: singular, ..Default::default() };
        check_evaluation_count(move |x: f64| (k * x).cos() / (1.0 + x), 0.0, Upper::Finite(3.0), &cfg)
            .map_err(TestCaseError::fail)?;
        check_evaluation_count(move |x: f64| (-k * x).exp(), 0.0, Upper::OPEN, &cfg)
            .map_err(TestCaseError::fail)?;
    }

    #[test]
    fn dump_round_trip_is_bit_stable(k in 0.1f64..10.0, xs in prop::collection::vec(0.0f64..=2.0, 1..50)) {
        let run = propagate(|x: f64| (k * x).exp().sqrt(), 0.0, 1.0, Upper::Finite(2.0), &ToleranceConfig::default())
            .unwrap();
        check_dump_round_trip(&run.solution, &xs).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn locate_returns_the_owning_element(x in 0.0f64..=1.0) {
        let sol = problem_by_id(6).unwrap().solve(&ToleranceConfig::default()).unwrap().solution;
        let i = sol.locate(x).unwrap();
        let el = &sol.elements()[i];
        prop_assert!(el.x_left <= x && x <= el.x_right(), "x={} in [{}, {}]", x, el.x_left, el.x_right());
        if i + 1 < sol.len() {
            prop_assert!(x < sol.elements()[i + 1].x_left);
        }
        prop_assert!(sol.locate(-x - 1e-3).is_err());
        prop_assert!(sol.locate(1.0 + x + 1e-3).is_err());
    }

    #[test]
    fn bender_solution_satisfies_the_equation(y0 in 1.0f64..10.0, x in 0.0f64..4.0) {
        let cfg = bender_config(&ToleranceConfig::default());
        let run = solve_bender(y0, 4.0, &cfg).unwrap();
        let y = run.solution.eval(x).unwrap();
        let dy = run.solution.eval_derivative(x).unwrap();
        prop_assert!((dy - bender_rhs(x, y)).abs() <= 1e-6, "x={} y'={} f={}", x, dy, bender_rhs(x, y));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bessel_wronskian(lambda in 0i32..30, z in 0.01f64..600.0) {
        // î_λ k̂_{λ+1} + î_{λ+1} k̂_λ = 1/z²; the exponential scalings cancel
        let w = bessel_ihat_scaled(lambda, z).unwrap() * bessel_khat_scaled(lambda + 1, z).unwrap()
            + bessel_ihat_scaled(lambda + 1, z).unwrap() * bessel_khat_scaled(lambda, z).unwrap();
        let want = 1.0 / (z * z);
        prop_assert!((w - want).abs() <= 1e-13 * want, "λ={} z={} w={:e}", lambda, z, w);
    }
}

#[test]
fn bender_residual_at_nodes() {
    // collocation makes dy/dx = cos(πxy) at every node up to the fixed-point tolerance
    let cfg = bender_config(&ToleranceConfig::default());
    let nodes = gauss_legendre_nodes(cfg.m).unwrap();
    for y0 in [1.0, 4.0, 10.0] {
        let run = solve_bender(y0, 4.0, &cfg).unwrap();
        for el in run.solution.elements() {
            for &tau in &nodes {
                let x = el.x_left + el.q * (tau + 1.0);
                let f = bender_rhs(x, el.value_at_tau(tau));
                let r = (el.slope_at_tau(tau) - f).abs();
                assert!(
                    r <= 10.0 * cfg.delta_rel * f.abs().max(1.0),
                    "y0={y0} x={x} r={r:e}"
                );
            }
        }
    }
}

#[test]
fn finite_range_ends_exactly_at_b() {
    for b in [0.3, 1.0, 7.25, 100.0] {
        let run = propagate(
            |x: f64| x.sin(),
            0.0,
            0.0,
            Upper::Finite(b),
            &ToleranceConfig::default(),
        )
        .unwrap();
        assert_eq!(run.solution.x_end(), b);
        assert_eq!(run.solution.elements().last().unwrap().x_right(), b);
        assert!((run.value() - (1.0 - b.cos())).abs() <= 1e-14);
    }
}

#[test]
fn double_range_is_not_cutoff_dependent() {
    let spec = DoubleRangeSpec::reference_family(1.0, 1.0);
    let base = ToleranceConfig::default();
    let tight = ToleranceConfig {
        open_tol: base.open_tol / 10.0,
        ..base.clone()
    };
    let a = double_range_integral(&spec, &base).unwrap().value;
    let b = double_range_integral(&spec, &tight).unwrap().value;
    assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
}

#[test]
fn sorted_queries_take_few_probes() {
    let sol = problem_by_id(6)
        .unwrap()
        .solve(&ToleranceConfig::default())
        .unwrap()
        .solution;
    let mut reader = sol.reader();
    let n = 100_000;
    for i in 0..n {
        reader.eval(i as f64 / (n - 1) as f64).unwrap();
    }
    let avg = reader.probes() as f64 / reader.queries() as f64;
    assert!(avg <= 3.0, "{avg} probes per query");
}

#[test]
fn fubini_toy() {
    // ∫_0^∞ dy e^{−y} ∫_y^∞ e^{−2x} dx = ∫_0^∞ e^{−2x} (1 − e^{−x}) dx = 1/6
    let cfg = ToleranceConfig::default();
    let j = inner_integral(|y: f64| (-y).exp(), &cfg).unwrap();
    let switched = outer_integral(|x: f64| (-2.0 * x).exp(), &j.solution, &cfg)
        .unwrap()
        .value();
    // original order, with a fresh inner propagation per outer evaluation
    let tail = |y: f64| {
        propagate(|x: f64| (-2.0 * x).exp(), y, 0.0, Upper::OPEN, &cfg)
            .map_or(f64::NAN, |r| r.value())
    };
    let direct = propagate(|y: f64| (-y).exp() * tail(y), 0.0, 0.0, Upper::OPEN, &cfg)
        .unwrap()
        .value();
    assert!((switched - 1.0 / 6.0).abs() <= 1e-14, "{switched}");
    assert!((switched - direct).abs() <= 1e-13, "{switched} vs {direct}");
}

#[test]
fn singular_start_on_inverse_sqrt() {
    let cfg = ToleranceConfig {
        singular_start: true,
        ..Default::default()
    };
    let run = propagate(|x: f64| 1.0 / x.sqrt(), 0.0, 0.0, Upper::Finite(0.5), &cfg).unwrap();
    assert!((run.value() - 2f64.sqrt()).abs() <= 1e-6, "{}", run.value());
}

#[test]
fn quarter_circle_steps_are_continuous() {
    let run = propagate(
        |x: f64| ((1.0 - x) * (1.0 + x)).sqrt(),
        0.0,
        0.0,
        Upper::Finite(1.0),
        &recorded(),
    )
    .unwrap();
    check_c1_continuity(&run).unwrap();
    assert!((run.value() - PI / 4.0).abs() <= 1e-15);
}
