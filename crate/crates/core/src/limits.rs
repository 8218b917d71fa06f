//! Numerical harnesses for the convergence theorems on the truncated state
//! space. Quasi-sure convergence is taken to be pointwise convergence on
//! the represented states; every representable variable is bounded.

use serde::{Deserialize, Serialize};

use crate::domain::{tail_truncation, CredalDomain};
use crate::engine::{
    brute_force_oracle, lower_expectation_with, upper_expectation_with, EngineOptions, Method, RandomVariable,
};
use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    #[default]
    None,
}

#[derive(Debug, Clone)]
pub enum Generator {
    /// `X_m = limit + (start - limit) / m`.
    Interpolate { start: RandomVariable },
    /// `X_m(i) = 1` for states `i > m`, else 0.
    TailIndicator,
    /// `X_m = limit + amplitude * (-1)^m / m`.
    Alternating { amplitude: f64 },
    /// `X_m = members[(m - 1) mod len]`.
    Cycle { members: Vec<RandomVariable> },
    /// Expression in `m`, `i` (1-based state) and `x` (the limit at state `i`).
    Expr(Expr),
}

#[derive(Debug, Clone)]
pub struct RvSequence {
    pub generator: Generator,
    pub limit: RandomVariable,
    pub declared_monotonicity: Monotonicity,
    pub dominating_bound: Option<RandomVariable>,
}

/// JSON form of a sequence, e.g.
/// `{ "rule": "interpolate", "start": [0, 0], "limit": [3, 1], "monotonicity": "increasing" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    #[serde(flatten)]
    pub rule: RuleSpec,
    pub limit: Vec<f64>,
    #[serde(default)]
    pub monotonicity: Monotonicity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RuleSpec {
    Interpolate { start: Vec<f64> },
    TailIndicator,
    Alternating { amplitude: f64 },
    Cycle { members: Vec<Vec<f64>> },
    Expr { expr: String },
}

impl RvSequence {
    pub fn new(generator: Generator, limit: RandomVariable, declared: Monotonicity, bound: Option<RandomVariable>) -> Result<Self> {
        let n = limit.len();
        let same = |x: &RandomVariable| x.len() == n;
        let ok = match &generator {
            Generator::Interpolate { start } => same(start),
            Generator::Cycle { members } => !members.is_empty() && members.iter().all(same),
            Generator::Alternating { amplitude } => amplitude.is_finite(),
            Generator::TailIndicator | Generator::Expr(_) => true,
        };
        if !ok || bound.as_ref().is_some_and(|b| !same(b)) {
            return Err(Error::InvalidSpec("sequence members must match the limit's length".into()));
        }
        Ok(RvSequence {
            generator,
            limit,
            declared_monotonicity: declared,
            dominating_bound: bound,
        })
    }

    pub fn from_spec(spec: &SequenceSpec) -> Result<Self> {
        let rv = |v: &Vec<f64>| RandomVariable::new(v.clone());
        let generator = match &spec.rule {
            RuleSpec::Interpolate { start } => Generator::Interpolate { start: rv(start)? },
            RuleSpec::TailIndicator => Generator::TailIndicator,
            RuleSpec::Alternating { amplitude } => Generator::Alternating { amplitude: *amplitude },
            RuleSpec::Cycle { members } => Generator::Cycle {
                members: members.iter().map(rv).collect::<Result<_>>()?,
            },
            RuleSpec::Expr { expr } => Generator::Expr(Expr::parse(expr, Scope::sequence())?),
        };
        let bound = spec.bound.as_ref().map(rv).transpose()?;
        RvSequence::new(generator, rv(&spec.limit)?, spec.monotonicity, bound)
    }

    /// `X_m` for `m >= 1`.
    pub fn at(&self, m: usize) -> Result<RandomVariable> {
        let lim = self.limit.values();
        let mf = m as f64;
        match &self.generator {
            Generator::Interpolate { start } => {
                RandomVariable::new(lim.iter().zip(start.values()).map(|(l, s)| l + (s - l) / mf).collect())
            }
            Generator::TailIndicator => {
                RandomVariable::new((1..=lim.len()).map(|i| if i > m { 1.0 } else { 0.0 }).collect())
            }
            Generator::Alternating { amplitude } => {
                let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
                RandomVariable::new(lim.iter().map(|l| l + amplitude * sign / mf).collect())
            }
            Generator::Cycle { members } => Ok(members[(m - 1) % members.len()].clone()),
            Generator::Expr(e) => RandomVariable::new(
                lim.iter()
                    .enumerate()
                    .map(|(k, &x)| {
                        e.eval(&Env {
                            x,
                            m: mf,
                            i: (k + 1) as f64,
                            ..Env::default()
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub m: usize,
    pub e_upper: f64,
    pub e_lower: f64,
    pub certified_error: f64,
}

/// One asserted inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

impl Check {
    fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Check {
            name: name.into(),
            lhs,
            rhs,
            passed: lhs <= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Exact supremum of the truncated tail mass at and beyond state `N`.
    pub tail_sup: f64,
    /// The same supremum over the oracle grid.
    pub tail_grid: f64,
    /// Mass allowed beyond the represented states.
    pub remainder: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessReport {
    pub harness: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub trace: Vec<TraceRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tails: Vec<TailRow>,
}

impl HarnessReport {
    fn new(harness: &'static str, checks: Vec<Check>, trace: Vec<TraceRow>) -> Self {
        HarnessReport {
            harness,
            passed: checks.iter().all(|c| c.passed),
            checks,
            trace,
            tails: Vec::new(),
        }
    }
}

/// Evaluation settings shared by the harnesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessOptions {
    pub method: Method,
    pub engine: EngineOptions,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions {
            method: Method::Auto,
            engine: EngineOptions::default(),
        }
    }
}

fn row(m: usize, x: &RandomVariable, d: &CredalDomain, o: &HarnessOptions) -> Result<TraceRow> {
    let up = upper_expectation_with(x, d, o.method, &o.engine)?;
    let lo = lower_expectation_with(x, d, o.method, &o.engine)?;
    Ok(TraceRow {
        m,
        e_upper: up.value,
        e_lower: lo.value,
        certified_error: up.certified_error.max(lo.certified_error),
    })
}

fn check_m_max(m_max: usize) -> Result<()> {
    if m_max == 0 {
        Err(Error::InvalidArgument("m_max must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// First state where `a <= b` fails.
fn first_violation(a: &RandomVariable, b: &RandomVariable) -> Option<usize> {
    a.values().iter().zip(b.values()).position(|(x, y)| x > y).map(|k| k + 1)
}

pub fn monotone_harness(seq: &RvSequence, d: &CredalDomain, m_max: usize, tol: f64) -> Result<HarnessReport> {
    monotone_harness_with(seq, d, m_max, tol, &HarnessOptions::default())
}

/// `E[X_m]` must move monotonically in the declared direction and end
/// within `tol` plus certified errors of `E[X]`.
pub fn monotone_harness_with(
    seq: &RvSequence,
    d: &CredalDomain,
    m_max: usize,
    tol: f64,
    o: &HarnessOptions,
) -> Result<HarnessReport> {
    check_m_max(m_max)?;
    let increasing = match seq.declared_monotonicity {
        Monotonicity::Increasing => true,
        Monotonicity::Decreasing => false,
        Monotonicity::None => {
            return Err(Error::InvalidArgument("monotone harness needs a declared direction".into()))
        }
    };
    // (smaller, larger) in the declared order.
    let ordered = |a: &RandomVariable, b: &RandomVariable| {
        if increasing {
            first_violation(a, b)
        } else {
            first_violation(b, a)
        }
    };
    let mut trace = Vec::with_capacity(m_max);
    let mut prev: Option<RandomVariable> = None;
    for m in 1..=m_max {
        let x = seq.at(m)?;
        if let Some(state) = prev.as_ref().and_then(|p| ordered(p, &x)).or_else(|| ordered(&x, &seq.limit)) {
            return Err(Error::MonotonicityViolated { m, state });
        }
        trace.push(row(m, &x, d, o)?);
        prev = Some(x);
    }
    let limit = row(0, &seq.limit, d, o)?;
    let mut checks = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_rhs = 0.0;
    for w in trace.windows(2) {
        let (a, b) = if increasing { (w[1], w[0]) } else { (w[0], w[1]) };
        // Movement against the declared direction.
        let drop = b.e_upper - a.e_upper;
        let allowed = tol + a.certified_error + b.certified_error;
        if drop - allowed > worst - worst_rhs {
            worst = drop;
            worst_rhs = allowed;
        }
    }
    if trace.len() > 1 {
        checks.push(Check::le("trace_monotone", worst, worst_rhs));
    }
    let last = trace[trace.len() - 1];
    checks.push(Check::le(
        "final_gap",
        (last.e_upper - limit.e_upper).abs(),
        tol + last.certified_error + limit.certified_error,
    ));
    Ok(HarnessReport::new("monotone", checks, trace))
}

pub fn dominated_harness(seq: &RvSequence, d: &CredalDomain, m_max: usize, tol: f64) -> Result<HarnessReport> {
    dominated_harness_with(seq, d, m_max, tol, &HarnessOptions::default())
}

/// `|X_m| <= bound` is enforced; the trace must settle (oscillation over the
/// last quarter within `tol`) and end near `E[limit]`.
pub fn dominated_harness_with(
    seq: &RvSequence,
    d: &CredalDomain,
    m_max: usize,
    tol: f64,
    o: &HarnessOptions,
) -> Result<HarnessReport> {
    check_m_max(m_max)?;
    let bound = seq
        .dominating_bound
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("dominated harness needs a dominating bound".into()))?;
    let mut trace = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let x = seq.at(m)?;
        if let Some(state) = first_violation(&x.map(f64::abs)?, bound) {
            return Err(Error::DominationViolated { m, state });
        }
        trace.push(row(m, &x, d, o)?);
    }
    let tail = &trace[m_max - m_max / 4 - 1..];
    let hi = tail.iter().map(|r| r.e_upper).fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().map(|r| r.e_upper).fold(f64::INFINITY, f64::min);
    let err = tail.iter().map(|r| r.certified_error).fold(0.0, f64::max);
    if hi - lo > tol + 2.0 * err {
        return Err(Error::NonConvergence(format!(
            "E[X_m] oscillates by {} over m = {}..={m_max}",
            hi - lo,
            tail[0].m
        )));
    }
    let limit = row(0, &seq.limit, d, o)?;
    let last = trace[m_max - 1];
    let checks = vec![
        Check::le("tail_oscillation", hi - lo, tol + 2.0 * err),
        Check::le(
            "final_gap",
            (last.e_upper - limit.e_upper).abs(),
            tol + last.certified_error + limit.certified_error,
        ),
    ];
    Ok(HarnessReport::new("dominated", checks, trace))
}

/// Which side of the sequence is bounded.
#[derive(Debug, Clone)]
pub enum FatouBound {
    /// `X_m >= Y`: `E[liminf X_m] <= liminf E[X_m]`.
    Lower(RandomVariable),
    /// `X_m <= Y`: `limsup E[X_m] <= E[limsup X_m]`.
    Upper(RandomVariable),
}

pub fn fatou_harness(seq: &RvSequence, d: &CredalDomain, m_max: usize, tol: f64, bound: &FatouBound) -> Result<HarnessReport> {
    fatou_harness_with(seq, d, m_max, tol, bound, &HarnessOptions::default())
}

/// Pointwise and value-level liminf/limsup are taken over the window
/// `m_max / 2 ..= m_max`.
pub fn fatou_harness_with(
    seq: &RvSequence,
    d: &CredalDomain,
    m_max: usize,
    tol: f64,
    bound: &FatouBound,
    o: &HarnessOptions,
) -> Result<HarnessReport> {
    check_m_max(m_max)?;
    let m0 = (m_max / 2).max(1);
    let n = seq.limit.len();
    let (lower, y) = match bound {
        FatouBound::Lower(y) => (true, y),
        FatouBound::Upper(y) => (false, y),
    };
    if y.len() != n {
        return Err(Error::InvalidArgument("Fatou bound has the wrong length".into()));
    }
    let mut trace = Vec::with_capacity(m_max);
    let mut env = vec![if lower { f64::INFINITY } else { f64::NEG_INFINITY }; n];
    for m in 1..=m_max {
        let x = seq.at(m)?;
        let bad = if lower { first_violation(y, &x) } else { first_violation(&x, y) };
        if let Some(state) = bad {
            return Err(Error::DominationViolated { m, state });
        }
        if m >= m0 {
            for (e, v) in env.iter_mut().zip(x.values()) {
                *e = if lower { e.min(*v) } else { e.max(*v) };
            }
        }
        trace.push(row(m, &x, d, o)?);
    }
    let pointwise = row(0, &RandomVariable::new(env)?, d, o)?;
    let window = &trace[m0 - 1..];
    let err = window.iter().map(|r| r.certified_error).fold(0.0, f64::max) + pointwise.certified_error;
    let check = if lower {
        let liminf = window.iter().map(|r| r.e_upper).fold(f64::INFINITY, f64::min);
        Check::le("E[liminf X_m] <= liminf E[X_m]", pointwise.e_upper, liminf + tol + err)
    } else {
        let limsup = window.iter().map(|r| r.e_upper).fold(f64::NEG_INFINITY, f64::max);
        Check::le("limsup E[X_m] <= E[limsup X_m]", limsup, pointwise.e_upper + tol + err)
    };
    Ok(HarnessReport::new("fatou", vec![check], trace))
}

const GRID_CAP: f64 = 1e6;

/// For each `epsilon`, finds the truncation index `N` from the domain's
/// budgets and certifies `sup E_theta[I_{state >= N}] + remainder < epsilon`.
///
/// The budget of state `i` is `lower_i + c_i`; lower bounds must be
/// constants. A residual state without an explicit bound gets budget 1.
/// The remainder is the domain's `tail_mass_bound`.
pub fn regularity_harness(d: &CredalDomain, epsilons: &[f64], grid_resolution: usize) -> Result<HarnessReport> {
    let n = d.n_states();
    let mut budgets = Vec::with_capacity(n);
    let mut lowers = Vec::with_capacity(n);
    for i in 1..=n {
        match d.bound(i) {
            Some(b) => {
                if !b.lower.is_constant() {
                    return Err(Error::InvalidArgument(format!(
                        "regularity needs constant lower bounds; bound {i} is `{}`",
                        b.lower.source()
                    )));
                }
                lowers.push(b.lower.eval_prefix(&[])?.max(0.0));
                budgets.push(b.gap_budget);
            }
            None => {
                lowers.push(0.0);
                budgets.push(1.0);
            }
        }
    }
    let remainder = d.tail_mass_bound();
    // The grid value is only reported, so its size is capped at about
    // GRID_CAP points (the last free level is solved at its endpoints).
    let levels = d.free_dims().saturating_sub(1) as i32;
    let fit = if levels == 0 {
        usize::MAX
    } else {
        (GRID_CAP.powf(1.0 / levels as f64).floor() as usize).max(2)
    };
    let grid_resolution = grid_resolution.min(fit);
    let mut checks = Vec::new();
    let mut trace = Vec::new();
    let mut tails = Vec::new();
    for &eps in epsilons {
        let big_n = tail_truncation(&budgets, &lowers, remainder, eps)?;
        let ind = RandomVariable::new((1..=n).map(|i| if i >= big_n { 1.0 } else { 0.0 }).collect())?;
        let method = if d.is_affine() { Method::NestedExact } else { Method::NestedNumeric };
        let sup = upper_expectation_with(&ind, d, method, &EngineOptions::default())?;
        let grid = brute_force_oracle(&ind, d, grid_resolution);
        let inf = lower_expectation_with(&ind, d, method, &EngineOptions::default())?;
        // The truncated value plus the mass beyond the represented states.
        let total = sup.value + sup.certified_error.max(remainder);
        let c = Check::le(format!("tail mass at N = {big_n} below {eps}"), total, eps);
        let passed = total < eps;
        checks.push(Check { passed, ..c });
        trace.push(TraceRow {
            m: big_n,
            e_upper: sup.value,
            e_lower: inf.value,
            certified_error: sup.certified_error.max(remainder),
        });
        tails.push(TailRow {
            epsilon: eps,
            n: big_n,
            tail_sup: sup.value,
            tail_grid: grid.value,
            remainder,
            passed,
        });
    }
    let mut r = HarnessReport::new("regularity", checks, trace);
    r.tails = tails;
    Ok(r)
}
