//! Legendre polynomials and their first and second primitives anchored at
//! τ = −1.
//!
//! With `s_μ(τ) = ∫_{-1}^{τ} P_μ` and `u_μ(τ) = ∫_{-1}^{τ} s_μ` both families
//! obey three-term recurrences with no boundary terms:
//!
//! ```text
//! s_0 = τ + 1,          s_1 = (τ² − 1)/2,
//! (μ+1) s_μ = (2μ−1) τ s_{μ−1} − (μ−2) s_{μ−2}        μ ≥ 2
//! u_0 = (τ + 1)²/2,     u_1 = (τ + 1)²(τ − 2)/6,
//! (μ+2) u_μ = (2μ−1) τ u_{μ−1} − (μ−3) u_{μ−2}        μ ≥ 2
//! ```
//!
//! Every value vanishes at τ = −1, and `u_μ` also has a vanishing slope there,
//! which is what carries value and slope continuity from one element to the
//! next.

use crate::error::{Error, Result};

fn check_tau(tau: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "local coordinate {tau} outside [-1, 1]"
        )))
    }
}

/// Legendre polynomial `P_mu(tau)`.
pub fn legendre(mu: usize, tau: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, tau);
    if mu == 0 {
        return prev;
    }
    for k in 2..=mu {
        let k = k as f64;
        let next = ((2.0 * k - 1.0) * tau * cur - (k - 1.0) * prev) / k;
        prev = cur;
        cur = next;
    }
    cur
}

/// First primitive `s_mu(tau)`; `tau` must lie in `[-1, 1]`.
pub fn eval_s(mu: usize, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(s_unchecked(mu, tau))
}

/// Second primitive `u_mu(tau)`; `tau` must lie in `[-1, 1]`.
pub fn eval_u(mu: usize, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(u_unchecked(mu, tau))
}

pub(crate) fn s_unchecked(mu: usize, tau: f64) -> f64 {
    let (mut prev, mut cur) = (tau + 1.0, 0.5 * (tau * tau - 1.0));
    if mu == 0 {
        return prev;
    }
    for k in 2..=mu {
        let k = k as f64;
        let next = ((2.0 * k - 1.0) * tau * cur - (k - 2.0) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

pub(crate) fn u_unchecked(mu: usize, tau: f64) -> f64 {
    let t1 = tau + 1.0;
    let (mut prev, mut cur) = (0.5 * t1 * t1, t1 * t1 * (tau - 2.0) / 6.0);
    if mu == 0 {
        return prev;
    }
    for k in 2..=mu {
        let k = k as f64;
        let next = ((2.0 * k - 1.0) * tau * cur - (k - 3.0) * prev) / (k + 2.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `[s_0(tau), …, s_{m-1}(tau)]`, one row of the collocation matrix.
pub fn eval_basis_row(m: usize, tau: f64) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("basis size {m} < 2")));
    }
    check_tau(tau)?;
    let mut row = vec![0.0; m];
    BasisTable::new(m).fill_s(tau, &mut row);
    Ok(row)
}

/// Evaluates rows of `P_μ`, `s_μ`, `u_μ` for `μ < max_order` at a local
/// coordinate, each in one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisTable {
    max_order: usize,
}

impl BasisTable {
    pub fn new(max_order: usize) -> Self {
        assert!(max_order >= 2, "basis needs at least two functions");
        Self { max_order }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn fill_p(&self, tau: f64, out: &mut [f64]) {
        let m = self.max_order;
        out[0] = 1.0;
        out[1] = tau;
        for k in 2..m {
            let kf = k as f64;
            out[k] = ((2.0 * kf - 1.0) * tau * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
        }
    }

    pub fn fill_s(&self, tau: f64, out: &mut [f64]) {
        let m = self.max_order;
        out[0] = tau + 1.0;
        out[1] = 0.5 * (tau * tau - 1.0);
        for k in 2..m {
            let kf = k as f64;
            out[k] = ((2.0 * kf - 1.0) * tau * out[k - 1] - (kf - 2.0) * out[k - 2]) / (kf + 1.0);
        }
    }

    pub fn fill_u(&self, tau: f64, out: &mut [f64]) {
        let m = self.max_order;
        let t1 = tau + 1.0;
        out[0] = 0.5 * t1 * t1;
        out[1] = t1 * t1 * (tau - 2.0) / 6.0;
        for k in 2..m {
            let kf = k as f64;
            out[k] = ((2.0 * kf - 1.0) * tau * out[k - 1] - (kf - 3.0) * out[k - 2]) / (kf + 2.0);
        }
    }
}

/// `Σ_μ u_μ(tau)·coeffs[μ]` by backward recurrence.
///
/// With `u_k = a_k u_{k−1} + b_k u_{k−2}` for `k ≥ 2`, where
/// `a_k = (2k−1)τ/(k+2)` and `b_k = −(k−3)/(k+2)`, the backward sweep
/// `y_k = c_k + a_{k+1} y_{k+1} + b_{k+2} y_{k+2}` leaves
/// `Σ = (c_0 + b_2 y_2) u_0 + y_1 u_1` with `b_2 = 1/4`.
pub fn clenshaw_sum_u(coeffs: &[f64], tau: f64) -> f64 {
    let n = coeffs.len();
    match n {
        0 => return 0.0,
        1 => return coeffs[0] * u_unchecked(0, tau),
        _ => {}
    }
    let a = |k: usize| (2.0 * k as f64 - 1.0) * tau / (k as f64 + 2.0);
    let b = |k: usize| -(k as f64 - 3.0) / (k as f64 + 2.0);
    let (mut y1, mut y2) = (0.0, 0.0);
    for k in (1..n).rev() {
        let yk = coeffs[k] + a(k + 1) * y1 + b(k + 2) * y2;
        y2 = y1;
        y1 = yk;
    }
    let t1 = tau + 1.0;
    let u0 = 0.5 * t1 * t1;
    let u1 = t1 * t1 * (tau - 2.0) / 6.0;
    (coeffs[0] + 0.25 * y2) * u0 + y1 * u1
}

/// `Σ_μ s_μ(tau)·coeffs[μ]` by backward recurrence (`b_2 = 0` for this family).
pub fn clenshaw_sum_s(coeffs: &[f64], tau: f64) -> f64 {
    let n = coeffs.len();
    match n {
        0 => return 0.0,
        1 => return coeffs[0] * (tau + 1.0),
        _ => {}
    }
    let a = |k: usize| (2.0 * k as f64 - 1.0) * tau / (k as f64 + 1.0);
    let b = |k: usize| -(k as f64 - 2.0) / (k as f64 + 1.0);
    let (mut y1, mut y2) = (0.0, 0.0);
    for k in (1..n).rev() {
        let yk = coeffs[k] + a(k + 1) * y1 + b(k + 2) * y2;
        y2 = y1;
        y1 = yk;
    }
    coeffs[0] * (tau + 1.0) + y1 * 0.5 * (tau * tau - 1.0)
}

/// `Σ_μ P_μ(tau)·coeffs[μ]` by the classical Clenshaw sweep.
pub fn clenshaw_sum_p(coeffs: &[f64], tau: f64) -> f64 {
    let n = coeffs.len();
    if n == 0 {
        return 0.0;
    }
    let a = |k: usize| (2.0 * k as f64 - 1.0) * tau / k as f64;
    let b = |k: usize| -(k as f64 - 1.0) / k as f64;
    let (mut y1, mut y2) = (0.0, 0.0);
    for k in (1..n).rev() {
        let yk = coeffs[k] + a(k + 1) * y1 + b(k + 2) * y2;
        y2 = y1;
        y1 = yk;
    }
    coeffs[0] + y1 * tau + b(2) * y2
}

/// Term-by-term `Σ u_μ(tau)·coeffs[μ]`, kept as a cross-check for the
/// backward recurrence.
pub fn naive_sum_u(coeffs: &[f64], tau: f64) -> f64 {
    if coeffs.len() < 2 {
        return coeffs.first().map_or(0.0, |c| c * u_unchecked(0, tau));
    }
    let mut row = vec![0.0; coeffs.len()];
    BasisTable::new(coeffs.len()).fill_u(tau, &mut row);
    row.iter().zip(coeffs).map(|(u, c)| u * c).sum()
}

pub fn naive_sum_s(coeffs: &[f64], tau: f64) -> f64 {
    if coeffs.len() < 2 {
        return coeffs.first().map_or(0.0, |c| c * (tau + 1.0));
    }
    let mut row = vec![0.0; coeffs.len()];
    BasisTable::new(coeffs.len()).fill_s(tau, &mut row);
    row.iter().zip(coeffs).map(|(s, c)| s * c).sum()
}

pub fn naive_sum_p(coeffs: &[f64], tau: f64) -> f64 {
    if coeffs.len() < 2 {
        return coeffs.first().copied().unwrap_or(0.0);
    }
    let mut row = vec![0.0; coeffs.len()];
    BasisTable::new(coeffs.len()).fill_p(tau, &mut row);
    row.iter().zip(coeffs).map(|(p, c)| p * c).sum()
}

/// Sum dispatch used by the solver; the `naive-basis-sum` feature swaps in
/// plain summation.
#[inline]
pub(crate) fn sum_u(coeffs: &[f64], tau: f64) -> f64 {
    if cfg!(feature = "naive-basis-sum") {
        naive_sum_u(coeffs, tau)
    } else {
        clenshaw_sum_u(coeffs, tau)
    }
}

#[inline]
pub(crate) fn sum_s(coeffs: &[f64], tau: f64) -> f64 {
    if cfg!(feature = "naive-basis-sum") {
        naive_sum_s(coeffs, tau)
    } else {
        clenshaw_sum_s(coeffs, tau)
    }
}

#[inline]
pub(crate) fn sum_p(coeffs: &[f64], tau: f64) -> f64 {
    if cfg!(feature = "naive-basis-sum") {
        naive_sum_p(coeffs, tau)
    } else {
        clenshaw_sum_p(coeffs, tau)
    }
}

/// k-th derivative of `P_mu` at τ = 1: `(μ+k)! / ((μ−k)! 2^k k!)`, zero when
/// `k > μ`.
pub fn legendre_derivative_at_one(mu: usize, k: usize) -> f64 {
    if k > mu {
        return 0.0;
    }
    let mut num = 1.0;
    for j in (mu - k + 1)..=(mu + k) {
        num *= j as f64;
    }
    let mut den = 1.0;
    for j in 1..=k {
        den *= 2.0 * j as f64;
    }
    num / den
}

/// τ-derivatives of `Σ u_μ B_μ` at τ = +1, orders one through four.
///
/// `d1 = 2B_0`, `d2 = Σ B_μ`, `d3 = Σ P′_μ(1) B_μ`, `d4 = Σ P″_μ(1) B_μ`.
/// The caller adds the `s_0 q f(x_i)` term and applies the chain rule.
pub fn derivative_values_at_end(coeffs: &[f64]) -> (f64, f64, f64, f64) {
    let d1 = 2.0 * coeffs.first().copied().unwrap_or(0.0);
    let mut d2 = 0.0;
    let mut d3 = 0.0;
    let mut d4 = 0.0;
    for (mu, &c) in coeffs.iter().enumerate() {
        let m = mu as f64;
        d2 += c;
        d3 += 0.5 * m * (m + 1.0) * c;
        d4 += (m - 1.0) * m * (m + 1.0) * (m + 2.0) / 8.0 * c;
    }
    (d1, d2, d3, d4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn base_cases() {
        assert_eq!(eval_s(0, 1.0).unwrap(), 2.0);
        assert_eq!(eval_s(5, -1.0).unwrap(), 0.0);
        assert_eq!(eval_u(0, 1.0).unwrap(), 2.0);
        assert_abs_diff_eq!(eval_u(1, 1.0).unwrap(), -2.0 / 3.0, epsilon = 1e-16);
        assert_eq!(eval_u(7, -1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(eval_s(2, 0.5).unwrap(), -0.1875, epsilon = 1e-16);
    }

    #[test]
    fn out_of_range_tau_is_rejected() {
        assert!(matches!(eval_s(3, 1.5), Err(Error::InvalidInput(_))));
        assert!(matches!(eval_u(3, f64::NAN), Err(Error::InvalidInput(_))));
        assert!(eval_basis_row(1, 0.0).is_err());
    }

    #[test]
    fn basis_rows() {
        assert_eq!(eval_basis_row(2, 1.0).unwrap(), vec![2.0, 0.0]);
        assert_eq!(eval_basis_row(3, -1.0).unwrap(), vec![0.0, 0.0, 0.0]);
        let row = eval_basis_row(13, 0.37).unwrap();
        for (mu, v) in row.iter().enumerate() {
            assert_eq!(*v, s_unchecked(mu, 0.37));
        }
    }

    #[test]
    fn endpoint_identities_hold_exactly() {
        for mu in 1..30 {
            assert_eq!(s_unchecked(mu, 1.0), 0.0, "s_{mu}(1)");
        }
        for mu in 2..30 {
            assert_eq!(u_unchecked(mu, 1.0), 0.0, "u_{mu}(1)");
        }
        for mu in 0..30 {
            assert_eq!(s_unchecked(mu, -1.0), 0.0);
            assert_eq!(u_unchecked(mu, -1.0), 0.0);
        }
    }

    #[test]
    fn unit_vectors_pick_single_terms() {
        let m = 9;
        for k in 0..m {
            let mut e = vec![0.0; m];
            e[k] = 1.0;
            for &tau in &[-0.9, -0.2, 0.0, 0.45, 1.0] {
                assert_abs_diff_eq!(
                    clenshaw_sum_u(&e, tau),
                    u_unchecked(k, tau),
                    epsilon = 1e-14
                );
                assert_abs_diff_eq!(
                    clenshaw_sum_s(&e, tau),
                    s_unchecked(k, tau),
                    epsilon = 1e-14
                );
                assert_abs_diff_eq!(clenshaw_sum_p(&e, tau), legendre(k, tau), epsilon = 1e-14);
            }
        }
        let mut e0 = vec![0.0; 5];
        e0[0] = 1.0;
        assert_eq!(clenshaw_sum_u(&e0, 1.0), 2.0);
    }

    #[test]
    fn derivative_constants() {
        assert_eq!(
            derivative_values_at_end(&[1.0, 0.0, 0.0, 0.0]),
            (2.0, 1.0, 0.0, 0.0)
        );
        assert_eq!(
            derivative_values_at_end(&[0.0, 1.0, 0.0, 0.0]),
            (0.0, 1.0, 1.0, 0.0)
        );
        for mu in 0..12 {
            let m = mu as f64;
            assert_eq!(legendre_derivative_at_one(mu, 1), m * (m + 1.0) / 2.0);
            assert_eq!(
                legendre_derivative_at_one(mu, 2),
                (m - 1.0) * m * (m + 1.0) * (m + 2.0) / 8.0
            );
        }
        assert_eq!(legendre_derivative_at_one(3, 3), 15.0);
    }
}
