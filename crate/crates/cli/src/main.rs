//! `ivpquad`: command-line front end to the built-in problems.
//!
//! Exit codes: 0 when every run meets its acceptance tolerance, 1 on a
//! numerical failure or a missed tolerance, 2 on a usage error.

mod report;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use ivp_quad::parallel::{map_ordered, Execution};
use ivp_quad::problems::bender::{
    bender_config, reference_y24, solve_bender, BenderSummary, REFERENCE_TOLERANCE,
};
use ivp_quad::problems::double_range::{
    double_range_integral, double_range_with_inner, reference_grid, DoubleRangeOutcome,
};
use ivp_quad::problems::{corpus, find_problem, DoubleRangeSpec, ProblemSpec};
use ivp_quad::propagator::StepRecord;
use ivp_quad::{Propagation, SolutionFunction, ToleranceConfig};
use serde::Serialize;

use report::{write_reports, Format, RunReport};

/// Largest `|y − y'|` accepted between a run and its tighter rerun.
const DRIFT_TOLERANCE: f64 = 5e-13;
/// Relative error expected on the reference β grid.
const GRID_TOLERANCE: f64 = 2e-13;

#[derive(Parser)]
#[command(
    name = "ivpquad",
    version,
    about = "Adaptive spectral finite-element integrator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Definite integrals from the built-in problem set.
    Integrate(IntegrateArgs),
    /// dy/dx = cos(πxy) from y(0) = y0.
    Bender(BenderArgs),
    /// Double-range integrals through a reusable inner solution J.
    Double(DoubleArgs),
    /// Evaluate a saved solution at points.
    Eval(EvalArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Number of basis functions per element.
    #[arg(long = "M", value_name = "M")]
    m: Option<usize>,
    /// Half-width of the first element.
    #[arg(long)]
    q1: Option<f64>,
    /// Relative tolerance on the integrand at element ends.
    #[arg(long)]
    drel: Option<f64>,
    /// Absolute tolerance on the integrand at element ends.
    #[arg(long)]
    dabs: Option<f64>,
    /// Pin the reference settings; conflicts with the individual tolerance flags.
    #[arg(long, conflicts_with_all = ["m", "q1", "drel", "dabs"])]
    paper_defaults: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write per-element steps as CSV.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Save the solution as JSON (single runs only).
    #[arg(long, value_name = "PATH")]
    dump: Option<PathBuf>,
    /// Run independent problems one after another.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn config(&self, base: ToleranceConfig) -> Result<ToleranceConfig, Failure> {
        let mut c = base;
        if !self.paper_defaults {
            if let Some(m) = self.m {
                c.m = m;
            }
            if let Some(q1) = self.q1 {
                c.first_step = 2.0 * q1;
            }
            if let Some(d) = self.drel {
                c.delta_rel = d;
            }
            if let Some(d) = self.dabs {
                c.delta_abs = d;
            }
        }
        c.record_steps = self.trace.is_some();
        c.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(c)
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn single_run_only(&self, runs: usize) -> Result<(), Failure> {
        if self.dump.is_some() && runs != 1 {
            return Err(Failure::Usage("--dump needs exactly one run".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    /// All fifteen problems of the built-in set.
    Closed15,
}

#[derive(Args)]
struct IntegrateArgs {
    /// Problem id (1-15) or name.
    #[arg(long, required_unless_present = "suite", conflicts_with = "suite")]
    id: Option<String>,
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenderArgs {
    /// Initial values: a list `1,2.5,4` or an integer range `1..10`.
    #[arg(long, default_value = "1", value_parser = parse_y0)]
    y0: Y0List,
    #[arg(long, default_value_t = 24.0)]
    xmax: f64,
    /// Rerun every y0 at this relative tolerance and report the drift.
    #[arg(long, value_name = "DREL")]
    drift_drel: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DoubleArgs {
    /// β₁ of the reference family (λ₁ = −11, μ₁ = 12, α₁ = 2β₁).
    #[arg(long, requires = "b2", conflicts_with_all = ["grid", "spec"])]
    b1: Option<f64>,
    /// β₂ of the reference family (λ₂ = −13, μ₂ = 14, α₂ = 2β₂).
    #[arg(long, requires = "b1", conflicts_with_all = ["grid", "spec"])]
    b2: Option<f64>,
    /// All nine points β₁, β₂ ∈ {0.5, 1, 2}.
    #[arg(long, conflicts_with_all = ["spec", "dump_j", "load_j"])]
    grid: bool,
    /// JSON file with lambda1, mu1, alpha1, beta1, lambda2, mu2, alpha2, beta2.
    #[arg(long, value_name = "PATH")]
    spec: Option<PathBuf>,
    /// Reference family with the reference settings.
    #[arg(long, conflicts_with_all = ["spec", "m", "q1", "drel", "dabs"])]
    defaults_table3: bool,
    /// Save the inner solution J.
    #[arg(long, value_name = "PATH")]
    dump_j: Option<PathBuf>,
    /// Reuse a saved J instead of building it.
    #[arg(long, value_name = "PATH", conflicts_with = "dump_j")]
    load_j: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvalArgs {
    /// Solution JSON written by --dump or --dump-j.
    #[arg(long, value_name = "PATH")]
    load: PathBuf,
    /// Also report dy/dx.
    #[arg(long)]
    derivative: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(required = true, allow_negative_numbers = true)]
    points: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Y0List(Vec<f64>);

fn parse_y0(s: &str) -> Result<Y0List, String> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: i64 = lo.trim().parse().map_err(|e| format!("range start: {e}"))?;
        let hi: i64 = hi.trim().parse().map_err(|e| format!("range end: {e}"))?;
        if lo > hi {
            return Err(format!("empty range {lo}..{hi}"));
        }
        return Ok(Y0List((lo..=hi).map(|v| v as f64).collect()));
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Y0List)
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<ivp_quad::Error> for Failure {
    fn from(e: ivp_quad::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

/// Whether every run met its tolerance.
type Outcome = Result<bool, Failure>;

#[derive(Serialize)]
struct TraceRow<'a> {
    problem: &'a str,
    x_left: f64,
    x_right: f64,
    width: f64,
    y_right: f64,
    /// Against the exact indefinite integral, when known.
    rel_err: Option<f64>,
    err: f64,
    tolerance: f64,
    bisections: usize,
    acceptance: ivp_quad::propagator::Acceptance,
}

/// Label, steps and exact indefinite integral of one traced run.
type TracedRun<'a> = (&'a str, &'a [StepRecord], Option<fn(f64) -> f64>);

fn write_trace(path: &Path, runs: &[TracedRun<'_>]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    for &(problem, steps, exact) in runs {
        for s in steps {
            let x_right = s.x_left + s.width;
            let rel_err = exact.map(|f| {
                let e = f(x_right);
                (s.y_right - e).abs() / e.abs().max(f64::MIN_POSITIVE)
            });
            w.serialize(TraceRow {
                problem,
                x_left: s.x_left,
                x_right,
                width: s.width,
                y_right: s.y_right,
                rel_err,
                err: s.err,
                tolerance: s.tolerance,
                bisections: s.bisections,
                acceptance: s.acceptance,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn emit(reports: &[RunReport], format: Format) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    write_reports(&mut out, reports, format)?;
    out.flush()?;
    Ok(())
}

fn integrate(args: &IntegrateArgs) -> Outcome {
    let problems: Vec<ProblemSpec> =
        match (&args.id, args.suite) {
            (Some(key), _) => vec![find_problem(key)
                .ok_or_else(|| Failure::Usage(format!("unknown problem {key:?}")))?],
            (None, Some(Suite::Closed15)) => corpus(),
            (None, None) => return Err(Failure::Usage("give --id or --suite".into())),
        };
    let common = &args.common;
    common.single_run_only(problems.len())?;
    let config = common.config(ToleranceConfig::default())?;
    let runs = map_ordered(&problems, common.execution(), |p| {
        timed(|| p.solve(&config))
    });

    let mut reports = Vec::new();
    let mut solved = Vec::new();
    let mut ok = true;
    for (p, (run, wall)) in problems.iter().zip(runs) {
        match run {
            Ok(run) => {
                let mut r = RunReport::new(
                    "integrate",
                    format!("{} {}", p.id, p.name),
                    run.value(),
                    &config,
                )
                .with_reference(p.reference);
                r.provenance = Some(p.provenance.into());
                r.tolerance = Some(p.smoothness.tolerance());
                r.passed = r.rel_err.is_some_and(|e| e <= p.smoothness.tolerance());
                r.n = run.stats.evaluations;
                r.i_max = run.stats.elements;
                r.wall_s = wall.as_secs_f64();
                ok &= r.passed;
                reports.push(r);
                solved.push((p, run));
            }
            Err(e) => {
                eprintln!("problem {}: {e}", p.id);
                ok = false;
            }
        }
    }
    emit(&reports, common.format)?;
    if let Some(path) = &common.trace {
        let names: Vec<String> = solved.iter().map(|(p, _)| p.id.to_string()).collect();
        let runs: Vec<_> = solved
            .iter()
            .zip(&names)
            .map(|((p, run), name)| (name.as_str(), run.steps.as_slice(), p.antiderivative()))
            .collect();
        write_trace(path, &runs)?;
    }
    if let (Some(path), Some((_, run))) = (&common.dump, solved.first()) {
        run.solution.save(path)?;
    }
    Ok(ok)
}

fn bender(args: &BenderArgs) -> Outcome {
    let common = &args.common;
    let y0s = &args.y0.0;
    common.single_run_only(y0s.len())?;
    if !(args.xmax > 0.0 && args.xmax.is_finite()) {
        return Err(Failure::Usage(format!(
            "--xmax must be > 0, got {}",
            args.xmax
        )));
    }
    let config = common.config(bender_config(&ToleranceConfig::default()))?;
    let rerun = match args.drift_drel {
        Some(d) => Some(common.config(ToleranceConfig {
            delta_rel: d,
            ..config.clone()
        })?),
        None => None,
    };
    let runs = map_ordered(y0s, common.execution(), |&y0| {
        timed(|| {
            let main = solve_bender(y0, args.xmax, &config)?;
            let tight = match &rerun {
                Some(c) => Some(solve_bender(y0, args.xmax, c)?.value()),
                None => None,
            };
            Ok::<_, ivp_quad::Error>((main, tight))
        })
    });

    let mut reports = Vec::new();
    let mut solved: Vec<(String, Propagation)> = Vec::new();
    let mut ok = true;
    for (&y0, (run, wall)) in y0s.iter().zip(runs) {
        match run {
            Ok((run, tight)) => {
                let s = BenderSummary::from_run(y0, args.xmax, &run);
                let mut r = RunReport::new("bender", format!("y0={y0}"), s.y_end, &config);
                if args.xmax == 24.0 {
                    if let Some(reference) = reference_y24(y0) {
                        r = r.with_reference(reference);
                        r.provenance = Some("reference y(24)".into());
                        r.tolerance = Some(REFERENCE_TOLERANCE);
                        r.passed &= r.abs_err.is_some_and(|e| e <= REFERENCE_TOLERANCE);
                    }
                }
                if let Some(yt) = tight {
                    let drift = (s.y_end - yt).abs();
                    r.drift = Some(drift);
                    r.passed &= drift <= DRIFT_TOLERANCE;
                }
                r.n = s.evaluations;
                r.i_max = s.elements;
                r.avg_step = Some(s.average_step);
                r.avg_evals = Some(s.average_evaluations);
                r.wall_s = wall.as_secs_f64();
                ok &= r.passed;
                reports.push(r);
                solved.push((format!("y0={y0}"), run));
            }
            Err(e) => {
                eprintln!("y0 = {y0}: {e}");
                ok = false;
            }
        }
    }
    emit(&reports, common.format)?;
    if let Some(path) = &common.trace {
        let runs: Vec<_> = solved
            .iter()
            .map(|(name, run)| (name.as_str(), run.steps.as_slice(), None))
            .collect();
        write_trace(path, &runs)?;
    }
    if let (Some(path), Some((_, run))) = (&common.dump, solved.first()) {
        run.solution.save(path)?;
    }
    Ok(ok)
}

struct DoubleJob {
    label: String,
    spec: DoubleRangeSpec,
    exact: Option<f64>,
}

fn reference_exact(spec: &DoubleRangeSpec) -> Option<f64> {
    reference_grid()
        .into_iter()
        .find(|g| DoubleRangeSpec::reference_family(g.beta1, g.beta2) == *spec)
        .map(|g| g.exact)
}

fn double(args: &DoubleArgs) -> Outcome {
    let common = &args.common;
    let jobs: Vec<DoubleJob> = if args.grid {
        reference_grid()
            .into_iter()
            .map(|g| DoubleJob {
                label: format!("b1={},b2={}", g.beta1, g.beta2),
                spec: DoubleRangeSpec::reference_family(g.beta1, g.beta2),
                exact: Some(g.exact),
            })
            .collect()
    } else if let Some(path) = &args.spec {
        let text = fs::read_to_string(path)?;
        let spec = DoubleRangeSpec::from_json(&text)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        vec![DoubleJob {
            label: path.display().to_string(),
            spec,
            exact: reference_exact(&spec),
        }]
    } else if let (Some(b1), Some(b2)) = (args.b1, args.b2) {
        let spec = DoubleRangeSpec::reference_family(b1, b2);
        spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        vec![DoubleJob {
            label: format!("b1={b1},b2={b2}"),
            spec,
            exact: reference_exact(&spec),
        }]
    } else {
        return Err(Failure::Usage(
            "give --b1 and --b2, --grid or --spec".into(),
        ));
    };
    common.single_run_only(jobs.len())?;
    let base = ToleranceConfig::default();
    let config = if args.defaults_table3 {
        ToleranceConfig {
            record_steps: common.trace.is_some(),
            ..base
        }
    } else {
        common.config(base)?
    };
    let loaded = match &args.load_j {
        Some(path) => Some(SolutionFunction::load(path)?),
        None => None,
    };

    let runs = map_ordered(&jobs, common.execution(), |job| {
        timed(|| match &loaded {
            Some(j) => double_range_with_inner(&job.spec, j.clone(), &config),
            None => double_range_integral(&job.spec, &config),
        })
    });

    let mut reports = Vec::new();
    let mut solved: Vec<(&str, DoubleRangeOutcome)> = Vec::new();
    let mut ok = true;
    for (job, (out, wall)) in jobs.iter().zip(runs) {
        match out {
            Ok(out) => {
                let mut r = RunReport::new("double", job.label.clone(), out.value, &config);
                if let Some(exact) = job.exact {
                    r = r.with_reference(exact);
                    r.provenance = Some("high-precision value".into());
                    r.tolerance = Some(GRID_TOLERANCE);
                    r.passed &= r.rel_err.is_some_and(|e| e <= GRID_TOLERANCE);
                }
                r.n = out.outer.stats.evaluations;
                r.n_inner = Some(out.inner_evaluations());
                r.i_max = out.outer.stats.elements;
                r.wall_s = wall.as_secs_f64();
                ok &= r.passed;
                reports.push(r);
                solved.push((&job.label, out));
            }
            Err(e) => {
                eprintln!("{}: {e}", job.label);
                ok = false;
            }
        }
    }
    emit(&reports, common.format)?;
    if let Some(path) = &common.trace {
        let runs: Vec<_> = solved
            .iter()
            .map(|(name, out)| (*name, out.outer.steps.as_slice(), None))
            .collect();
        write_trace(path, &runs)?;
    }
    if let Some((_, out)) = solved.first() {
        if let Some(path) = &common.dump {
            out.outer.solution.save(path)?;
        }
        if let Some(path) = &args.dump_j {
            out.inner.save(path)?;
        }
    }
    Ok(ok)
}

#[derive(Serialize)]
struct EvalRow {
    x: f64,
    y: f64,
    dy: Option<f64>,
}

fn eval(args: &EvalArgs) -> Outcome {
    let sol = SolutionFunction::load(&args.load)?;
    let mut reader = sol.reader();
    let mut rows = Vec::with_capacity(args.points.len());
    for &x in &args.points {
        let y = reader.eval(x)?;
        let dy = if args.derivative {
            Some(reader.eval_derivative(x)?)
        } else {
            None
        };
        rows.push(EvalRow { x, y, dy });
    }
    let mut out = io::stdout().lock();
    match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &rows).map_err(io::Error::from)?;
            writeln!(out)?;
        }
        Format::Table => {
            for r in &rows {
                match r.dy {
                    Some(dy) => writeln!(out, "{:>24.16e}  {:>24.16e}  {:>24.16e}", r.x, r.y, dy)?,
                    None => writeln!(out, "{:>24.16e}  {:>24.16e}", r.x, r.y)?,
                }
            }
        }
    }
    out.flush()?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Integrate(a) => integrate(a),
        Command::Bender(a) => bender(a),
        Command::Double(a) => double(a),
        Command::Eval(a) => eval(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => Cli::command().error(ErrorKind::ValueValidation, msg).exit(),
    }
}
