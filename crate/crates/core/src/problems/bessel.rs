//! Spherical modified Bessel functions of integer order,
//! `î_λ(z) = √(π/2z)·I_{λ+½}(z)` and `k̂_λ(z) = √(2/πz)·K_{λ+½}(z)`.
//!
//! Negative orders reduce to non-negative ones through
//! `î_{−m−1} = î_m + (−1)^m k̂_m` and `k̂_{−m−1} = k̂_m`.

use crate::error::{Error, Result};

pub const MAX_ORDER: i32 = 30;

/// Below this argument `î_n` is summed from its power series, whose terms
/// are all positive; above it the finite closed form has no cancellation.
const SERIES_LIMIT: f64 = 500.0;

fn check(lambda: i32, z: f64) -> Result<()> {
    if lambda.abs() > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "Bessel order {lambda} outside [-{MAX_ORDER}, {MAX_ORDER}]"
        )));
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain {
            x: z,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(())
}

/// `e^{z} k̂_n(z)` for `n ≥ 0` by upward recurrence.
fn khat_scaled_nonneg(n: u32, z: f64) -> f64 {
    let k0 = 1.0 / z;
    if n == 0 {
        return k0;
    }
    let mut prev = k0;
    let mut cur = (1.0 + 1.0 / z) / z;
    for k in 1..n {
        let next = prev + (2 * k + 1) as f64 / z * cur;
        prev = cur;
        cur = next;
    }
    cur
}

/// `e^{−z} î_n(z)` for `n ≥ 0`.
fn ihat_scaled_nonneg(n: u32, z: f64) -> f64 {
    if z <= SERIES_LIMIT {
        // î_n(z) = z^n/(2n+1)!! · Σ_k (z²/2)^k / (k! (2n+3)(2n+5)…(2n+2k+1))
        let half_z2 = 0.5 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1u32;
        loop {
            term *= half_z2 / (k as f64 * (2 * n + 2 * k + 1) as f64);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
            k += 1;
        }
        // z^n/(2n+1)!! accumulated as a product to stay in range
        let mut pre = 1.0;
        for j in 1..=n {
            pre *= z / (2 * j + 1) as f64;
        }
        pre * sum * (-z).exp()
    } else {
        // 2 e^{−z} î_n = Σ (−1)^k a_k / z^{k+1} − (−1)^n e^{−2z} Σ a_k / z^{k+1}
        // with a_k = (n+k)! / (k! (n−k)! 2^k)
        let mut a = 1.0;
        let mut alt = 0.0;
        let mut plain = 0.0;
        let mut zk = 1.0 / z;
        for k in 0..=n {
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            alt += sign * a * zk;
            plain += a * zk;
            let kf = k as f64;
            let nf = n as f64;
            a *= (nf + kf + 1.0) * (nf - kf) / (2.0 * (kf + 1.0));
            zk /= z;
        }
        let parity = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        0.5 * (alt - parity * (-2.0 * z).exp() * plain)
    }
}

/// `e^{−z} î_λ(z)`.
pub fn bessel_ihat_scaled(lambda: i32, z: f64) -> Result<f64> {
    check(lambda, z)?;
    if lambda >= 0 {
        return Ok(ihat_scaled_nonneg(lambda as u32, z));
    }
    let m = (-lambda - 1) as u32;
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let v = ihat_scaled_nonneg(m, z) + sign * (-2.0 * z).exp() * khat_scaled_nonneg(m, z);
    finite(v, "scaled î", z)
}

/// `e^{z} k̂_λ(z)`.
pub fn bessel_khat_scaled(lambda: i32, z: f64) -> Result<f64> {
    check(lambda, z)?;
    let n = if lambda >= 0 { lambda } else { -lambda - 1 } as u32;
    finite(khat_scaled_nonneg(n, z), "scaled k̂", z)
}

pub fn bessel_ihat(lambda: i32, z: f64) -> Result<f64> {
    check(lambda, z)?;
    if lambda >= 0 {
        return finite(ihat_scaled_nonneg(lambda as u32, z) * z.exp(), "î", z);
    }
    let m = (-lambda - 1) as u32;
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let i = ihat_scaled_nonneg(m, z) * z.exp();
    let k = khat_scaled_nonneg(m, z) * (-z).exp();
    finite(i + sign * k, "î", z)
}

pub fn bessel_khat(lambda: i32, z: f64) -> Result<f64> {
    let s = bessel_khat_scaled(lambda, z)?;
    finite(s * (-z).exp(), "k̂", z)
}

fn finite(v: f64, what: &'static str, z: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow { what, z })
    }
}
