//! Problem files, reports and the `radepi` command dispatcher.
//!
//! Problem files are JSON:
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "objective": { "kind": "affine", "coeffs": ["-2", "1"] },
//!   "constraints": [{ "kind": "affine", "coeffs": ["1", "1"], "offset": "-3" }],
//!   "domain": { "kind": "points", "points": [["1", "2"], ["2", "1"]] }
//! }
//! ```
//!
//! Optional keys: `name`, `variables`, `candidates` (points to query when
//! `--point` is absent), `directions` (extra candidate rays, and the default
//! `eval` directions) and `estimator` (overrides of [`EstimatorConfig`]).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::certificates::{
    basis_select, check_fj_necessary, geometric_from, kkt_sufficient_from, FjOptions, KktMode, Status,
    SufficiencyConfig,
};
use crate::cones::{analyze, ConeConfig, EpiEntry, SetKind};
use crate::descent::{solve, DescentConfig};
use crate::epiderivative::{objective_epiderivative, radial_epiderivative, EstimatorConfig};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::point::{Direction, Point};
use crate::problem::{Domain, Problem};

pub const EXAMPLE1: &str = include_str!("../fixtures/example1.json");
pub const EXAMPLE2: &str = include_str!("../fixtures/example2.json");

fn default_domain() -> Domain {
    Domain::All
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variables: Vec<String>,
    pub objective: Expression,
    #[serde(default)]
    pub constraints: Vec<Expression>,
    #[serde(default = "default_domain")]
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Point>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub directions: Vec<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
}

impl ProblemFile {
    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if n == 0 {
            return Err(Error::Parse("dimension must be positive".into()));
        }
        if !self.variables.is_empty() && self.variables.len() != n {
            return Err(Error::Parse(format!("variables: expected {n} names, found {}", self.variables.len())));
        }
        self.objective.validate(n).map_err(|e| Error::Parse(format!("objective: {e}")))?;
        for (i, g) in self.constraints.iter().enumerate() {
            g.validate(n).map_err(|e| Error::Parse(format!("constraints[{i}]: {e}")))?;
        }
        self.domain.validate(n).map_err(|e| Error::Parse(format!("domain: {e}")))?;
        for (i, p) in self.candidates.iter().enumerate() {
            if p.dim() != n {
                return Err(Error::Parse(format!("candidates[{i}]: dimension {}, expected {n}", p.dim())));
            }
        }
        for (i, d) in self.directions.iter().enumerate() {
            if d.dim() != n {
                return Err(Error::Parse(format!("directions[{i}]: dimension {}, expected {n}", d.dim())));
            }
            if d.is_zero() {
                return Err(Error::Parse(format!("directions[{i}]: zero direction")));
            }
        }
        if let Some(cfg) = &self.estimator {
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn problem(&self) -> Problem {
        Problem {
            dim: self.dimension,
            objective: self.objective.clone(),
            constraints: self.constraints.clone(),
            domain: self.domain.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }
}

/// Parses and validates a problem file.
pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.validate()?;
    Ok(file)
}

/// A path, or one of the built-in fixtures `ex1` / `ex2`.
pub fn load_problem(source: &str) -> Result<ProblemFile> {
    match source {
        "ex1" => parse_problem(EXAMPLE1),
        "ex2" => parse_problem(EXAMPLE2),
        path => parse_problem(&fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))?),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Active,
    All,
}

#[derive(Parser, Debug)]
#[command(name = "radepi", version, about = "Radial epiderivatives and global optimality certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Epiderivatives of f and every g_i at (point, direction) pairs.
    Eval(Args),
    /// Feasible, descent and constraint cones at a point.
    Cones(Args),
    /// Geometric, Fritz John and KKT certificates at a point.
    Certify(Args),
    /// Global descent from a feasible start.
    Solve(Args),
    /// Assumption checks and set relations at a point.
    Check(Args),
}

#[derive(clap::Args, Debug, Clone)]
pub struct Args {
    /// Problem file, or `ex1` / `ex2`.
    #[arg(long)]
    pub problem: String,
    /// Comma-separated rational coordinates, e.g. `2,1` or `1/2,-3`.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Repeatable.
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Vec<String>,
    /// Starting point for `solve` (defaults to `--point`).
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,
    #[arg(long, value_enum, default_value = "active")]
    pub mode: ModeArg,
    /// Sign tolerance for inexact values.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sampled candidate rays on continuous domains.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    /// Accept linearly dependent direction sets in the FJ check.
    #[arg(long)]
    pub allow_dependent: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigSnapshot {
    pub estimator: EstimatorConfig,
    pub samples: Option<usize>,
    pub mode: ModeArg,
    pub max_iterations: usize,
    pub allow_dependent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: Option<ConfigSnapshot>,
    pub problem: Option<ProblemFile>,
    pub results: Vec<Value>,
    pub status: Option<Status>,
    pub error: Option<String>,
    pub exit_code: i32,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

/// Result of one invocation: exit code, stdout text (the report, or help)
/// and any diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub code: i32,
    pub report: Option<String>,
    pub stderr: Option<String>,
}

struct Context {
    file: ProblemFile,
    problem: Problem,
    cones: ConeConfig,
    args: Args,
}

impl Context {
    fn points(&self) -> Result<Vec<Point>> {
        match &self.args.point {
            Some(p) => Ok(vec![self.parse_point(p)?]),
            None if !self.file.candidates.is_empty() => Ok(self.file.candidates.clone()),
            None => Err(Error::Parse("no --point given and the problem lists no candidates".into())),
        }
    }

    fn parse_point(&self, text: &str) -> Result<Point> {
        let p = Point::parse(text)?;
        self.problem.check_point(&p)?;
        Ok(p)
    }

    fn directions(&self) -> Result<Vec<Direction>> {
        let mut out = Vec::new();
        for text in &self.args.direction {
            let d = Direction::parse(text)?;
            self.problem.check_direction(&d)?;
            out.push(d);
        }
        Ok(out)
    }
}

fn build_context(args: &Args) -> Result<Context> {
    let file = load_problem(&args.problem)?;
    let problem = Problem::new(file.dimension, file.objective.clone(), file.constraints.clone(), file.domain.clone())?;
    let mut estimator = file.estimator.clone().unwrap_or_default();
    estimator.seed = args.seed;
    if let Some(tol) = args.tol {
        if !(tol >= 0.0) {
            return Err(Error::InvalidConfig("--tol must be nonnegative".into()));
        }
        estimator.tolerance = tol;
    }
    estimator.validate()?;
    let mut cones = ConeConfig { estimator, samples: args.budget, seed: args.seed, ..ConeConfig::default() };
    if let Some(tol) = args.tol {
        cones.active_tol = tol;
    }
    cones.candidates = file.directions.clone();
    let mut ctx = Context { file, problem, cones, args: args.clone() };
    let extra = ctx.directions()?;
    let mut merged = extra;
    merged.extend(ctx.cones.candidates.drain(..));
    ctx.cones.candidates = merged;
    Ok(ctx)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report fragments always serialize")
}

fn cmd_eval(ctx: &Context) -> Result<(Vec<Value>, Option<Status>, i32)> {
    let mut dirs = ctx.directions()?;
    if dirs.is_empty() {
        dirs = ctx.file.directions.clone();
    }
    if dirs.is_empty() {
        return Err(Error::Parse("eval needs --direction or problem directions".into()));
    }
    let p = &ctx.problem;
    let est = &ctx.cones.estimator;
    let mut results = Vec::new();
    for x in ctx.points()? {
        for d in &dirs {
            let objective = EpiEntry::from_result(radial_epiderivative(&p.objective, &x, d, &p.domain, est))?;
            let on_s = EpiEntry::from_result(objective_epiderivative(p, &x, d, est))?;
            let constraints = p
                .constraints
                .iter()
                .map(|g| EpiEntry::from_result(radial_epiderivative(g, &x, d, &p.domain, est)))
                .collect::<Result<Vec<_>>>()?;
            results.push(json!({
                "point": x,
                "direction": d,
                "objective": to_value(&objective),
                "objective_on_feasible_set": to_value(&on_s),
                "constraints": to_value(&constraints),
            }));
        }
    }
    Ok((results, None, 0))
}

fn cmd_cones(ctx: &Context) -> Result<(Vec<Value>, Option<Status>, i32)> {
    let mut results = Vec::new();
    for x in ctx.points()? {
        let a = analyze(&ctx.problem, &x, &ctx.cones)?;
        let sets: serde_json::Map<String, Value> =
            SetKind::ALL.iter().map(|k| (k.label().to_string(), to_value(&a.set(*k).directions))).collect();
        results.push(json!({
            "point": x,
            "exactness": a.exactness,
            "active": a.active,
            "sets": sets,
            "records": to_value(&a.records),
        }));
    }
    Ok((results, None, 0))
}

fn cmd_certify(ctx: &Context) -> Result<(Vec<Value>, Option<Status>, i32)> {
    let p = &ctx.problem;
    let mut results = Vec::new();
    let mut overall = Status::Certified;
    let suff = SufficiencyConfig { cones: ctx.cones.clone(), ..SufficiencyConfig::default() };
    let mode = match ctx.args.mode {
        ModeArg::Active => KktMode::Active,
        ModeArg::All => KktMode::All,
    };
    for x in ctx.points()? {
        let a = analyze(p, &x, &ctx.cones)?;
        let geometric = geometric_from(&a);
        let d = a.set(SetKind::FeasibleD);
        let basis = if d.is_empty() { Vec::new() } else { basis_select(&d)? };
        let fj = check_fj_necessary(p, &x, &basis, &ctx.cones.estimator, &FjOptions { allow_dependent: ctx.args.allow_dependent })?;
        let kkt = kkt_sufficient_from(p, &a, mode, &suff)?;
        if geometric.status != Status::Certified {
            overall = if geometric.status == Status::Refuted || overall == Status::Refuted {
                Status::Refuted
            } else {
                Status::Inconclusive
            };
        }
        results.push(json!({
            "point": x,
            "status": geometric.status,
            "global_min_geometric": to_value(&geometric),
            "fj_necessary": to_value(&fj),
            "kkt_sufficient": to_value(&kkt),
        }));
    }
    let code = if overall == Status::Certified { 0 } else { 1 };
    Ok((results, Some(overall), code))
}

fn cmd_solve(ctx: &Context) -> Result<(Vec<Value>, Option<Status>, i32)> {
    let start = match (&ctx.args.start, &ctx.args.point) {
        (Some(s), _) | (None, Some(s)) => ctx.parse_point(s)?,
        (None, None) => ctx.points()?.remove(0),
    };
    let cfg = DescentConfig {
        cones: ConeConfig { samples: ctx.args.budget.or(Some(512)), ..ctx.cones.clone() },
        max_iterations: ctx.args.max_iterations,
        ..DescentConfig::default()
    };
    let t = solve(&ctx.problem, &start, &cfg)?;
    let status = t.certificate.status;
    Ok((vec![to_value(&t)], Some(status), 0))
}

fn cmd_check(ctx: &Context) -> Result<(Vec<Value>, Option<Status>, i32)> {
    let points = match (&ctx.args.point, ctx.problem.feasible_points()) {
        (None, Some(s)) => s,
        _ => ctx.points()?,
    };
    let mut results = Vec::new();
    let mut violated = false;
    for x in points {
        let a = analyze(&ctx.problem, &x, &ctx.cones)?;
        let report = a.relation_suite(ctx.problem.constraints.len());
        violated |= !report.violations().is_empty();
        results.push(json!({ "point": x, "relations": to_value(&report) }));
    }
    Ok((results, None, if violated { 1 } else { 0 }))
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Io(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs one command; `args` includes the program name.
pub fn run<I, T>(args: I) -> RunOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                RunOutcome { code: 2, report: None, stderr: Some(e.to_string()) }
            } else {
                RunOutcome { code: 0, report: Some(e.to_string()), stderr: None }
            };
        }
    };
    let (name, args, handler): (&str, &Args, fn(&Context) -> Result<(Vec<Value>, Option<Status>, i32)>) = match &cli.command {
        Command::Eval(a) => ("eval", a, cmd_eval),
        Command::Cones(a) => ("cones", a, cmd_cones),
        Command::Certify(a) => ("certify", a, cmd_certify),
        Command::Solve(a) => ("solve", a, cmd_solve),
        Command::Check(a) => ("check", a, cmd_check),
    };
    let mut report = Report {
        tool: "radepi",
        version: env!("CARGO_PKG_VERSION"),
        command: name.to_string(),
        seed: args.seed,
        config: None,
        problem: None,
        results: Vec::new(),
        status: None,
        error: None,
        exit_code: 0,
    };
    let outcome = build_context(args).and_then(|ctx| {
        report.config = Some(ConfigSnapshot {
            estimator: ctx.cones.estimator.clone(),
            samples: ctx.cones.samples,
            mode: args.mode,
            max_iterations: args.max_iterations,
            allow_dependent: args.allow_dependent,
        });
        report.problem = Some(ctx.file.clone());
        handler(&ctx)
    });
    match outcome {
        Ok((results, status, code)) => {
            report.results = results;
            report.status = status;
            report.exit_code = code;
        }
        Err(e) => {
            report.error = Some(e.to_string());
            report.exit_code = match e {
                Error::Internal(_) | Error::NoImprovement => 1,
                _ => 2,
            };
        }
    }
    let text = report.to_json();
    if let Some(path) = &args.out {
        if let Err(e) = write_atomic(path, &text) {
            return RunOutcome { code: 2, report: Some(text), stderr: Some(e.to_string()) };
        }
        return RunOutcome { code: report.exit_code, report: None, stderr: None };
    }
    RunOutcome { code: report.exit_code, report: Some(text), stderr: report.error.clone() }
}
