use thiserror::Error;

use crate::solution::SolutionFunction;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("integrand returned a non-finite value at x = {x}")]
    Integrand { x: f64 },

    #[error("element at x = {x} still fails after {bisections} bisections (q = {q:e})")]
    Stiffness { x: f64, q: f64, bisections: usize },

    #[error("propagation stopped after {elements} elements without reaching the end (x = {x})")]
    NonConvergence {
        x: f64,
        elements: usize,
        partial: Box<SolutionFunction>,
    },

    #[error("x = {x} lies outside the solved domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("{what} overflows double precision at z = {z}; use the exponentially scaled form")]
    Overflow { what: &'static str, z: f64 },

    #[error("unsupported solution document version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed solution document: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
