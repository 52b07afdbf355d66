//! Gauss–Legendre collocation: nodes, the constant `s_μ(τ_ν)` matrix and its
//! factorization, shared by every element of every run with the same size.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::basis::BasisTable;
use crate::error::{Error, Result};
use crate::lu::LuFactors;

pub const MIN_SIZE: usize = 2;
pub const MAX_SIZE: usize = 64;

const MIN_PIVOT: f64 = 1e-12;
const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_STEPS: usize = 100;

/// `P_n(x)` and `P_n'(x)` together.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// The `m` roots of `P_m`, ascending.
///
/// Newton iteration from the asymptotic guess `cos(π(i − 1/4)/(m + 1/2))`;
/// only the non-negative half is iterated and the rest mirrored, so the
/// set is exactly symmetric.
pub fn gauss_legendre_nodes(m: usize) -> Result<Vec<f64>> {
    if !(MIN_SIZE..=MAX_SIZE).contains(&m) {
        return Err(Error::InvalidInput(format!(
            "collocation size {m} outside [{MIN_SIZE}, {MAX_SIZE}]"
        )));
    }
    let half = m.div_ceil(2);
    let mut positive = Vec::with_capacity(half);
    for i in 1..=half {
        if m % 2 == 1 && i == half {
            positive.push(0.0);
            continue;
        }
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_STEPS {
            let (p, dp) = legendre_with_derivative(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                let (p, dp) = legendre_with_derivative(m, x);
                x -= p / dp;
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Configuration(format!(
                "Newton iteration for root {i} of P_{m} did not converge"
            )));
        }
        positive.push(x);
    }
    // positive is descending from the largest root toward zero
    let mut nodes: Vec<f64> = positive
        .iter()
        .filter(|&&x| x != 0.0)
        .map(|&x| -x)
        .collect();
    if m % 2 == 1 {
        nodes.push(0.0);
    }
    nodes.extend(positive.iter().rev().filter(|&&x| x != 0.0));
    Ok(nodes)
}

/// Right-hand side `q·[f(τ_ν) − f(−1)]` of the collocation system.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsVector(pub Vec<f64>);

impl RhsVector {
    pub fn from_values(q: f64, f_nodes: &[f64], f_left: f64) -> Self {
        Self(f_nodes.iter().map(|f| q * (f - f_left)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Collocation data for one basis size: nodes, the factorized `s_μ(τ_ν)`
/// matrix, the factorized `P_μ(τ_ν)` matrix used by the singular-start
/// expansion, and `u_μ(τ_ν)` for reconstructing `y` at the nodes.
#[derive(Debug, Clone)]
pub struct CollocationSystem {
    m: usize,
    nodes: Vec<f64>,
    s_matrix: Vec<f64>,
    s_lu: LuFactors,
    p_lu: LuFactors,
    u_matrix: Vec<f64>,
}

impl CollocationSystem {
    pub fn build(m: usize) -> Result<Self> {
        let nodes = gauss_legendre_nodes(m)?;
        let table = BasisTable::new(m);
        let mut s_matrix = vec![0.0; m * m];
        let mut p_matrix = vec![0.0; m * m];
        let mut u_matrix = vec![0.0; m * m];
        for (nu, &tau) in nodes.iter().enumerate() {
            table.fill_s(tau, &mut s_matrix[nu * m..(nu + 1) * m]);
            table.fill_p(tau, &mut p_matrix[nu * m..(nu + 1) * m]);
            table.fill_u(tau, &mut u_matrix[nu * m..(nu + 1) * m]);
        }
        let pivot_err = |which: &str, e: crate::lu::SingularPivot| {
            Error::Configuration(format!(
                "{which} collocation matrix for M = {m} has pivot {:e} in column {}",
                e.magnitude, e.column
            ))
        };
        let s_lu = LuFactors::factor(&s_matrix, m, MIN_PIVOT).map_err(|e| pivot_err("s", e))?;
        let p_lu = LuFactors::factor(&p_matrix, m, MIN_PIVOT).map_err(|e| pivot_err("P", e))?;
        Ok(Self {
            m,
            nodes,
            s_matrix,
            s_lu,
            p_lu,
            u_matrix,
        })
    }

    /// Process-wide cached system for size `m`; built on first request.
    pub fn shared(m: usize) -> Result<Arc<Self>> {
        static REGISTRY: OnceLock<RwLock<HashMap<usize, Arc<CollocationSystem>>>> = OnceLock::new();
        let registry = REGISTRY.get_or_init(Default::default);
        if let Some(sys) = registry.read().expect("registry poisoned").get(&m) {
            return Ok(Arc::clone(sys));
        }
        let built = Arc::new(Self::build(m)?);
        let mut map = registry.write().expect("registry poisoned");
        Ok(Arc::clone(map.entry(m).or_insert(built)))
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Entry `A[ν][μ] = s_μ(τ_ν)`.
    pub fn matrix_entry(&self, nu: usize, mu: usize) -> f64 {
        self.s_matrix[nu * self.m + mu]
    }

    pub fn factors(&self) -> &LuFactors {
        &self.s_lu
    }

    pub fn solve_coefficients(&self, rhs: &RhsVector) -> Result<Vec<f64>> {
        if rhs.0.len() != self.m {
            return Err(Error::InvalidInput(format!(
                "right-hand side has {} entries, system size is {}",
                rhs.0.len(),
                self.m
            )));
        }
        Ok(self.s_lu.solve(&rhs.0))
    }

    pub(crate) fn solve_into(&self, rhs: &[f64], out: &mut [f64]) {
        self.s_lu.solve_into(rhs, out);
    }

    /// Solves `Σ_μ P_μ(τ_ν) B_μ = rhs_ν`, the collocation of the
    /// singular-start expansion.
    pub(crate) fn solve_singular_into(&self, rhs: &[f64], out: &mut [f64]) {
        self.p_lu.solve_into(rhs, out);
    }

    /// `Σ_μ u_μ(τ_ν) B_μ` at every node.
    pub(crate) fn u_sums_at_nodes(&self, coeffs: &[f64], out: &mut [f64]) {
        let m = self.m;
        for (nu, o) in out.iter_mut().enumerate() {
            let row = &self.u_matrix[nu * m..(nu + 1) * m];
            *o = row.iter().zip(coeffs).map(|(u, b)| u * b).sum();
        }
    }

    /// `Σ_μ s_μ(τ_ν) B_μ` at every node.
    pub(crate) fn s_sums_at_nodes(&self, coeffs: &[f64], out: &mut [f64]) {
        let m = self.m;
        for (nu, o) in out.iter_mut().enumerate() {
            let row = &self.s_matrix[nu * m..(nu + 1) * m];
            *o = row.iter().zip(coeffs).map(|(s, b)| s * b).sum();
        }
    }
}

/// Free-function form of [`CollocationSystem::build`].
pub fn build_system(m: usize) -> Result<CollocationSystem> {
    CollocationSystem::build(m)
}

pub fn solve_coefficients(system: &CollocationSystem, rhs: &RhsVector) -> Result<Vec<f64>> {
    system.solve_coefficients(rhs)
}
