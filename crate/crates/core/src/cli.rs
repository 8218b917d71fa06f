//! Command-line front end.
//!
//! Every subcommand reads one JSON spec, prints one JSON object on stdout and
//! optionally writes a CSV file. Failures print `{"error": code, "message": s}`
//! on stderr with exit status 2 (spec or I/O), 3 (numerical) or 4 (a
//! harness contract failed).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::domain::{build_domain, CredalDomain, DomainSpec, SimplexPolicy};
use crate::engine::{
    axiom_check_with, brute_force_oracle, lower_expectation_with, upper_expectation_with, EngineOptions, Method,
    RandomVariable, SublinearResult, TransformSpec, TransformSpecJson,
};
use crate::engine::transform_eval_with;
use crate::error::{Error, Result};
use crate::format::{cell, to_json};
use crate::independence::{
    default_family, identically_distributed_check, independence_gap, peng_independent_expectation,
    per_theta_independent_expectation, TestFunction, TestFunctionSpec,
};
use crate::limits::{
    dominated_harness_with, fatou_harness_with, monotone_harness_with, regularity_harness, FatouBound, HarnessOptions,
    HarnessReport, RvSequence, SequenceSpec,
};
use crate::lln::{lln_table, moment_estimators, moment_estimators_exact, LlnMethod, LlnOptions, LlnSpec};

#[derive(Debug, Parser)]
#[command(name = "subexp", version, about = "Upper and lower expectations over credal domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Upper (or lower) expectation of a random variable.
    Eval,
    /// Brute-force grid maximization.
    Oracle,
    /// Expectation through a change of variables onto a rectangle.
    Transform,
    /// Expectations of phi(X, Y) under the two independence notions.
    Independence,
    /// Law-of-large-numbers table.
    Lln,
    /// Run a convergence or axiom harness.
    Verify,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// Spec file (JSON).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Grid resolution per projection interval.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Numerical tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the domain's simplex policy.
    #[arg(long, global = true, value_enum)]
    pub simplex: Option<PolicyArg>,
    /// CSV output path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Evaluation method (engine method, or exact_dp / monte_carlo for lln).
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Independence mode.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum PolicyArg {
    Enforce,
    PaperFaithful,
}

impl From<PolicyArg> for SimplexPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Enforce => SimplexPolicy::Enforce,
            PolicyArg::PaperFaithful => SimplexPolicy::PaperFaithful,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Mode {
    PerTheta,
    Peng,
    Gap,
    /// Identical-distribution check over a test-function family.
    Identical,
}

#[derive(Debug, Deserialize)]
struct EvalSpec {
    domain: DomainSpec,
    rv: RandomVariable,
    #[serde(default)]
    method: Option<Method>,
    /// Report the lower expectation instead.
    #[serde(default)]
    lower: bool,
}

#[derive(Debug, Deserialize)]
struct TransformFile {
    rv: RandomVariable,
    transform: TransformSpecJson,
}

#[derive(Debug, Deserialize)]
struct IndependenceSpec {
    #[serde(flatten)]
    phi: Option<TestFunctionSpec>,
    x: RandomVariable,
    #[serde(default)]
    y: Option<RandomVariable>,
    domain: DomainSpec,
    /// Identical-distribution mode: the second variable and its domain.
    #[serde(default)]
    x2: Option<RandomVariable>,
    #[serde(default)]
    domain2: Option<DomainSpec>,
    /// Univariate family; defaults to `{x, -x, x^2, -x^2, min(x,c), max(x,c)}`.
    #[serde(default)]
    family: Option<Vec<TestFunctionSpec>>,
    #[serde(default)]
    c: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "harness", rename_all = "snake_case")]
enum VerifySpec {
    Monotone {
        domain: DomainSpec,
        sequence: SequenceSpec,
        m_max: usize,
        #[serde(default)]
        tol: Option<f64>,
    },
    Dominated {
        domain: DomainSpec,
        sequence: SequenceSpec,
        m_max: usize,
        #[serde(default)]
        tol: Option<f64>,
    },
    Fatou {
        domain: DomainSpec,
        sequence: SequenceSpec,
        m_max: usize,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        lower_bound: Option<Vec<f64>>,
        #[serde(default)]
        upper_bound: Option<Vec<f64>>,
    },
    Regularity {
        domain: DomainSpec,
        epsilons: Vec<f64>,
    },
    Axioms {
        domain: DomainSpec,
        rvs: Vec<Vec<f64>>,
        #[serde(default)]
        lambdas: Vec<f64>,
        #[serde(default)]
        tol: Option<f64>,
    },
}

#[derive(Debug, Deserialize)]
struct MomentSpec {
    n: usize,
    #[serde(default = "one")]
    samples: usize,
    #[serde(default)]
    resolution: Option<usize>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
struct LlnFile {
    #[serde(flatten)]
    lln: LlnSpec,
    #[serde(default)]
    moments: Option<MomentSpec>,
}

/// Output of a subcommand: JSON for stdout, optional CSV, and whether a
/// checked contract failed.
struct Outcome {
    json: String,
    csv: Option<String>,
    failed: bool,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            report(&Error::InvalidArgument(e.to_string().trim().to_string()));
            return 2;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", out.json);
            if out.failed {
                4
            } else {
                0
            }
        }
        Err(e) => {
            report(&e);
            e.exit_code()
        }
    }
}

fn report(e: &Error) {
    let msg = json!({"error": e.code(), "message": e.to_string()});
    eprintln!("{msg}");
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let f = &cli.flags;
    let work = || -> Result<Outcome> {
        let path = f
            .spec
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--spec is required".into()))?;
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let out = match cli.command {
            Command::Eval => eval(&text, f, false)?,
            Command::Oracle => eval(&text, f, true)?,
            Command::Transform => transform(&text, f)?,
            Command::Independence => independence(&text, f)?,
            Command::Lln => lln(&text, f)?,
            Command::Verify => verify(&text, f)?,
        };
        if let (Some(p), Some(csv)) = (&f.out, &out.csv) {
            write_csv(p, csv)?;
        }
        Ok(out)
    };
    match f.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

fn write_csv(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
}

fn domain(spec: &DomainSpec, f: &Flags) -> Result<CredalDomain> {
    let mut spec = spec.clone();
    if let Some(p) = f.simplex {
        spec.simplex_policy = p.into();
    }
    build_domain(&spec)
}

fn engine_method(f: &Flags, spec: Option<Method>) -> Result<Method> {
    match &f.method {
        Some(s) => s.parse(),
        None => Ok(spec.unwrap_or(Method::Auto)),
    }
}

fn engine_opts(f: &Flags, default_grid: usize) -> EngineOptions {
    EngineOptions {
        grid_resolution: f.grid.unwrap_or(default_grid),
        ..EngineOptions::default()
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// `state,theta,value` per state of the maximizing weight vector.
fn result_csv(r: &SublinearResult, x: &RandomVariable) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["state", "theta", "value"]).map_err(csv_err)?;
    for (k, (t, a)) in r.argmax_theta.0.iter().zip(x.values()).enumerate() {
        w.write_record([(k + 1).to_string(), cell(Some(*t)), cell(Some(*a))])
            .map_err(csv_err)?;
    }
    finish_csv(w)
}

fn eval(text: &str, f: &Flags, oracle: bool) -> Result<Outcome> {
    let spec: EvalSpec = parse(text)?;
    let d = domain(&spec.domain, f)?;
    let (method, opts) = if oracle {
        (Method::Grid, engine_opts(f, 1001))
    } else {
        (engine_method(f, spec.method)?, engine_opts(f, EngineOptions::default().grid_resolution))
    };
    let r = if oracle && !spec.lower {
        let r = brute_force_oracle(&spec.rv, &d, opts.grid_resolution);
        if !r.value.is_finite() {
            return Err(Error::InfeasibleDomain(format!("no grid point at resolution {}", opts.grid_resolution)));
        }
        r
    } else if spec.lower {
        lower_expectation_with(&spec.rv, &d, method, &opts)?
    } else {
        upper_expectation_with(&spec.rv, &d, method, &opts)?
    };
    Ok(Outcome {
        json: to_json(&r)?,
        csv: Some(result_csv(&r, &spec.rv)?),
        failed: false,
    })
}

fn transform(text: &str, f: &Flags) -> Result<Outcome> {
    let spec: TransformFile = parse(text)?;
    let mut tj = spec.transform;
    if let Some(p) = f.simplex {
        tj.simplex_policy = p.into();
    }
    let t = TransformSpec::from_json(&tj)?;
    let method = match &f.method {
        Some(s) => s.parse()?,
        None => Method::Transform,
    };
    let r = transform_eval_with(&spec.rv, &t, method, &engine_opts(f, EngineOptions::default().grid_resolution))?;
    Ok(Outcome {
        json: to_json(&r)?,
        csv: Some(result_csv(&r, &spec.rv)?),
        failed: false,
    })
}

fn independence(text: &str, f: &Flags) -> Result<Outcome> {
    let spec: IndependenceSpec = parse(text)?;
    let d = domain(&spec.domain, f)?;
    let res = f.grid.unwrap_or(201);
    let mode = f.mode.unwrap_or(Mode::Gap);
    if mode == Mode::Identical {
        let x2 = spec.x2.as_ref().unwrap_or(&spec.x);
        let d2 = match &spec.domain2 {
            Some(s) => domain(s, f)?,
            None => d.clone(),
        };
        let family = match &spec.family {
            Some(fs) => fs.iter().map(|s| TestFunction::from_spec(s, false)).collect::<Result<Vec<_>>>()?,
            None => {
                let r = spec.x.sup_norm().max(x2.sup_norm());
                default_family(r, spec.c.unwrap_or(0.0))?
            }
        };
        let rep = identically_distributed_check(&spec.x, &d, x2, &d2, &family, f.tol.unwrap_or(1e-9))?;
        let mut w = csv_writer();
        w.write_record(["phi", "first", "second", "allowed", "passed"]).map_err(csv_err)?;
        for c in &rep.checks {
            w.write_record([
                c.phi.clone(),
                cell(Some(c.first)),
                cell(Some(c.second)),
                cell(Some(c.allowed)),
                c.passed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        return Ok(Outcome {
            json: to_json(&rep)?,
            csv: Some(finish_csv(w)?),
            failed: false,
        });
    }
    let phi_spec = spec
        .phi
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("independence spec needs phi, M and L".into()))?;
    let phi = TestFunction::from_spec(phi_spec, true)?;
    let y = spec
        .y
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("independence spec needs y".into()))?;
    let method = engine_method(f, None)?;
    let opts = engine_opts(f, res);
    let (json, rows): (String, Vec<(&str, SublinearResult)>) = match mode {
        Mode::PerTheta => {
            let r = per_theta_independent_expectation(&phi, &spec.x, y, &d, res)?;
            (to_json(&r)?, vec![("per_theta", r)])
        }
        Mode::Peng => {
            let r = peng_independent_expectation(&phi, &spec.x, y, &d, method, &opts)?;
            (to_json(&r)?, vec![("peng", r)])
        }
        Mode::Gap | Mode::Identical => {
            let g = independence_gap(&phi, &spec.x, y, &d, res)?;
            (to_json(&g)?, vec![("per_theta", g.per_theta.clone()), ("peng", g.peng.clone())])
        }
    };
    let mut w = csv_writer();
    w.write_record(["mode", "value", "certified_error"]).map_err(csv_err)?;
    for (name, r) in &rows {
        w.write_record([name.to_string(), cell(Some(r.value)), cell(Some(r.certified_error))])
            .map_err(csv_err)?;
    }
    Ok(Outcome {
        json,
        csv: Some(finish_csv(w)?),
        failed: false,
    })
}

#[derive(Serialize)]
struct LlnOutput<'a> {
    #[serde(flatten)]
    table: &'a crate::lln::LlnTable,
    #[serde(skip_serializing_if = "Option::is_none")]
    moments: Option<serde_json::Value>,
}

fn lln(text: &str, f: &Flags) -> Result<Outcome> {
    let file: LlnFile = parse(text)?;
    let spec = file.lln;
    let d = domain(&spec.domain, f)?;
    let phi = TestFunction::from_spec(&spec.phi, false)?;
    let method = match &f.method {
        Some(s) => serde_json::from_value::<LlnMethod>(json!(s))
            .map_err(|_| Error::InvalidArgument(format!("unknown lln method `{s}`")))?,
        None => spec.method,
    };
    let opts = LlnOptions {
        resolution: f.grid.unwrap_or(LlnOptions::default().resolution),
        samples: spec.samples,
        seed: f.seed.unwrap_or(spec.seed),
    };
    let table = lln_table(&phi, &spec.rv, &d, &spec.n_list, method, &opts, f.tol.unwrap_or(1e-9))?;
    let moments = match &file.moments {
        Some(m) => {
            let res = m.resolution.unwrap_or(opts.resolution);
            let (lo, hi) = moment_estimators(&spec.rv, &d, m.n, res, m.samples, opts.seed)?;
            let (elo, ehi) = moment_estimators_exact(&spec.rv, &d)?;
            Some(json!({"mu_hat_lower": lo, "mu_hat_upper": hi, "exact_lower": elo, "exact_upper": ehi}))
        }
        None => None,
    };
    let mut w = csv_writer();
    w.write_record(["n", "value", "target", "gap", "method", "stderr"]).map_err(csv_err)?;
    for r in &table.rows {
        w.write_record([
            r.n.to_string(),
            cell(Some(r.value)),
            cell(Some(r.target)),
            cell(Some(r.gap)),
            r.method.as_str().to_string(),
            cell(r.stderr),
        ])
        .map_err(csv_err)?;
    }
    Ok(Outcome {
        json: to_json(&LlnOutput {
            table: &table,
            moments,
        })?,
        csv: Some(finish_csv(w)?),
        failed: !table.trend_ok,
    })
}

fn trace_csv(r: &HarnessReport) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["m", "E_upper", "certified_error"]).map_err(csv_err)?;
    for t in &r.trace {
        w.write_record([t.m.to_string(), cell(Some(t.e_upper)), cell(Some(t.certified_error))])
            .map_err(csv_err)?;
    }
    finish_csv(w)
}

fn verify(text: &str, f: &Flags) -> Result<Outcome> {
    let spec: VerifySpec = parse(text)?;
    let harness_opts = |f: &Flags| -> Result<HarnessOptions> {
        Ok(HarnessOptions {
            method: engine_method(f, None)?,
            engine: engine_opts(f, EngineOptions::default().grid_resolution),
        })
    };
    let report = match spec {
        VerifySpec::Monotone {
            domain: ds,
            sequence,
            m_max,
            tol,
        } => {
            let d = domain(&ds, f)?;
            let seq = RvSequence::from_spec(&sequence)?;
            monotone_harness_with(&seq, &d, m_max, f.tol.or(tol).unwrap_or(1e-9), &harness_opts(f)?)?
        }
        VerifySpec::Dominated {
            domain: ds,
            sequence,
            m_max,
            tol,
        } => {
            let d = domain(&ds, f)?;
            let seq = RvSequence::from_spec(&sequence)?;
            dominated_harness_with(&seq, &d, m_max, f.tol.or(tol).unwrap_or(1e-9), &harness_opts(f)?)?
        }
        VerifySpec::Fatou {
            domain: ds,
            sequence,
            m_max,
            tol,
            lower_bound,
            upper_bound,
        } => {
            let d = domain(&ds, f)?;
            let seq = RvSequence::from_spec(&sequence)?;
            let bound = match (lower_bound, upper_bound) {
                (Some(l), None) => FatouBound::Lower(RandomVariable::new(l)?),
                (None, Some(u)) => FatouBound::Upper(RandomVariable::new(u)?),
                _ => {
                    return Err(Error::InvalidSpec(
                        "fatou needs exactly one of lower_bound and upper_bound".into(),
                    ))
                }
            };
            fatou_harness_with(&seq, &d, m_max, f.tol.or(tol).unwrap_or(1e-9), &bound, &harness_opts(f)?)?
        }
        VerifySpec::Regularity { domain: ds, epsilons } => {
            let d = domain(&ds, f)?;
            regularity_harness(&d, &epsilons, f.grid.unwrap_or(33))?
        }
        VerifySpec::Axioms {
            domain: ds,
            rvs,
            lambdas,
            tol,
        } => {
            let d = domain(&ds, f)?;
            let xs = rvs.into_iter().map(RandomVariable::new).collect::<Result<Vec<_>>>()?;
            let method = match &f.method {
                Some(s) => s.parse()?,
                None => Method::Grid,
            };
            let rep = axiom_check_with(&d, &xs, &lambdas, f.tol.or(tol).unwrap_or(1e-9), method, &engine_opts(f, 201))?;
            let mut w = csv_writer();
            w.write_record(["axiom", "checked", "passed"]).map_err(csv_err)?;
            for o in &rep.outcomes {
                w.write_record([o.axiom.to_string(), o.checked.to_string(), o.passed.to_string()])
                    .map_err(csv_err)?;
            }
            return Ok(Outcome {
                json: to_json(&rep)?,
                csv: Some(finish_csv(w)?),
                failed: !rep.passed,
            });
        }
    };
    Ok(Outcome {
        json: to_json(&report)?,
        csv: Some(trace_csv(&report)?),
        failed: !report.passed,
    })
}
