//! Run reports and their table, CSV and JSON renderings.
//!
//! CSV columns, in order:
//!
//! ```text
//! command problem value reference provenance rel_err abs_err tolerance passed
//! n n_inner i_max avg_step avg_evals drift wall_s m q1 drel dabs
//! ```
//!
//! Empty cells are absent values. `tolerance` bounds `abs_err` for `bender`
//! and `rel_err` otherwise. JSON output is an array of objects with the same
//! fields.

use std::io::{self, Write};

use clap::ValueEnum;
use ivp_quad::ToleranceConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub problem: String,
    pub value: f64,
    pub reference: Option<f64>,
    pub provenance: Option<String>,
    pub rel_err: Option<f64>,
    pub abs_err: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: bool,
    /// Integrand evaluations; for `double` those of the outer integral.
    pub n: u64,
    /// Evaluations spent building the inner integral, 0 when it was loaded.
    pub n_inner: Option<u64>,
    pub i_max: usize,
    pub avg_step: Option<f64>,
    pub avg_evals: Option<f64>,
    /// `|y − y'|` against a rerun at a tighter tolerance.
    pub drift: Option<f64>,
    pub wall_s: f64,
    pub m: usize,
    pub q1: f64,
    pub drel: f64,
    pub dabs: f64,
}

impl RunReport {
    pub fn new(command: &str, problem: String, value: f64, config: &ToleranceConfig) -> Self {
        Self {
            command: command.into(),
            problem,
            value,
            reference: None,
            provenance: None,
            rel_err: None,
            abs_err: None,
            tolerance: None,
            passed: value.is_finite(),
            n: 0,
            n_inner: None,
            i_max: 0,
            avg_step: None,
            avg_evals: None,
            drift: None,
            wall_s: 0.0,
            m: config.m,
            q1: 0.5 * config.first_step,
            drel: config.delta_rel,
            dabs: config.delta_abs,
        }
    }

    /// Records the reference and both error measures.
    pub fn with_reference(mut self, reference: f64) -> Self {
        let abs = (self.value - reference).abs();
        self.reference = Some(reference);
        self.abs_err = Some(abs);
        self.rel_err = Some(abs / reference.abs().max(f64::MIN_POSITIVE));
        self
    }
}

pub fn write_reports(
    out: &mut impl Write,
    reports: &[RunReport],
    format: Format,
) -> io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in reports {
                w.serialize(r)?;
            }
            w.flush()
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, reports)?;
            writeln!(out)
        }
        Format::Table => write_table(out, reports),
    }
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.prec$e}"))
}

fn write_table(out: &mut impl Write, reports: &[RunReport]) -> io::Result<()> {
    let any = |f: fn(&RunReport) -> bool| reports.iter().any(f);
    let show_ref = any(|r| r.reference.is_some());
    let show_inner = any(|r| r.n_inner.is_some());
    let show_avg = any(|r| r.avg_step.is_some());
    let show_drift = any(|r| r.drift.is_some());

    let mut header = vec![format!("{:<20}", "problem"), format!("{:>23}", "value")];
    if show_ref {
        header.push(format!("{:>23}", "reference"));
        header.push(format!("{:>10}", "rel err"));
        header.push(format!("{:>10}", "abs err"));
    }
    if show_inner {
        header.push(format!("{:>7}", "N of J"));
        header.push(format!("{:>7}", "N of I"));
    } else {
        header.push(format!("{:>9}", "N"));
    }
    header.push(format!("{:>8}", "i_max"));
    if show_avg {
        header.push(format!("{:>10}", "2q_ave"));
        header.push(format!("{:>9}", "N_ave"));
    }
    if show_drift {
        header.push(format!("{:>10}", "drift"));
    }
    header.push(format!("{:>10}", "time [s]"));
    header.push("status".into());
    writeln!(out, "{}", header.join("  "))?;

    for r in reports {
        let mut row = vec![format!("{:<20}", r.problem), format!("{:>23.15e}", r.value)];
        if show_ref {
            row.push(format!("{:>23}", opt(r.reference, 15)));
            row.push(format!("{:>10}", opt(r.rel_err, 3)));
            row.push(format!("{:>10}", opt(r.abs_err, 3)));
        }
        if show_inner {
            row.push(format!(
                "{:>7}",
                r.n_inner.map_or("-".into(), |n| n.to_string())
            ));
            row.push(format!("{:>7}", r.n));
        } else {
            row.push(format!("{:>9}", r.n));
        }
        row.push(format!("{:>8}", r.i_max));
        if show_avg {
            row.push(format!("{:>10}", opt(r.avg_step, 3)));
            row.push(format!(
                "{:>9}",
                r.avg_evals.map_or("-".into(), |v| format!("{v:.3}"))
            ));
        }
        if show_drift {
            row.push(format!("{:>10}", opt(r.drift, 2)));
        }
        row.push(format!("{:>10.4}", r.wall_s));
        row.push(if r.passed { "ok" } else { "FAIL" }.into());
        writeln!(out, "{}", row.join("  "))?;
    }
    if let Some(r) = reports.first() {
        writeln!(
            out,
            "M = {}, q1 = {}, drel = {:e}, dabs = {:e}",
            r.m, r.q1, r.drel, r.dabs
        )?;
    }
    Ok(())
}
