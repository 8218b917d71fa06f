//! Expectations of `phi(X, Y)` when `Y` is independent of `X` under every
//! single measure of the domain (one shared `theta` in both factors), and
//! under the nested definition where the inner supremum is taken first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{CredalDomain, SimplexPolicy, ThetaVector};
use crate::engine::{upper_expectation_with, EngineOptions, Method, RandomVariable, SublinearResult};
use crate::error::{Error, Result};
use crate::expr::{Expr, Scope};

/// A bounded Lipschitz test function in `x` (and `y` when bivariate).
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub expr: Expr,
    /// Declared `sup |phi|`.
    pub bound_m: f64,
    /// Declared Lipschitz constant.
    pub lipschitz_l: f64,
    bivariate: bool,
}

/// JSON form `{ "phi": "expr", "M": n, "L": n }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub phi: String,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl TestFunction {
    pub fn univariate(text: &str, bound_m: f64, lipschitz_l: f64) -> Result<Self> {
        Self::build(Expr::parse(text, Scope::univariate())?, bound_m, lipschitz_l, false)
    }

    pub fn bivariate(text: &str, bound_m: f64, lipschitz_l: f64) -> Result<Self> {
        Self::build(Expr::parse(text, Scope::bivariate())?, bound_m, lipschitz_l, true)
    }

    pub fn from_spec(spec: &TestFunctionSpec, bivariate: bool) -> Result<Self> {
        if bivariate {
            Self::bivariate(&spec.phi, spec.m, spec.l)
        } else {
            Self::univariate(&spec.phi, spec.m, spec.l)
        }
    }

    fn build(expr: Expr, bound_m: f64, lipschitz_l: f64, bivariate: bool) -> Result<Self> {
        if !(bound_m >= 0.0 && bound_m.is_finite()) || !(lipschitz_l >= 0.0 && lipschitz_l.is_finite()) {
            return Err(Error::InvalidArgument("M and L must be finite and >= 0".into()));
        }
        Ok(TestFunction {
            expr,
            bound_m,
            lipschitz_l,
            bivariate,
        })
    }

    pub fn is_bivariate(&self) -> bool {
        self.bivariate
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.expr.eval_x(x)
    }

    pub fn eval2(&self, x: f64, y: f64) -> Result<f64> {
        self.expr.eval_xy(x, y)
    }

    /// Checks the declared bound and Lipschitz constant on consecutive pairs
    /// of `points` (univariate).
    pub fn spot_check(&self, points: &[f64]) -> Result<()> {
        let slack = 1e-9;
        let vals: Vec<f64> = points.iter().map(|&p| self.eval(p)).collect::<Result<_>>()?;
        for (p, v) in points.iter().zip(&vals) {
            if v.abs() > self.bound_m + slack {
                return Err(Error::InvalidArgument(format!(
                    "|phi({p})| = {} exceeds M = {}",
                    v.abs(),
                    self.bound_m
                )));
            }
        }
        for k in 1..points.len() {
            let dx = (points[k] - points[k - 1]).abs();
            let dv = (vals[k] - vals[k - 1]).abs();
            if dv > self.lipschitz_l * dx + slack {
                return Err(Error::InvalidArgument(format!(
                    "phi changes by {dv} between {} and {}, above L = {}",
                    points[k - 1],
                    points[k],
                    self.lipschitz_l
                )));
            }
        }
        Ok(())
    }
}

/// `{x, -x, x^2, -x^2, min(x, c), max(x, c)}` with bounds valid for `|x| <= r`.
pub fn default_family(r: f64, c: f64) -> Result<Vec<TestFunction>> {
    let r = r.abs();
    let cut = r.max(c.abs());
    Ok(vec![
        TestFunction::univariate("x", r, 1.0)?,
        TestFunction::univariate("-x", r, 1.0)?,
        TestFunction::univariate("x*x", r * r, 2.0 * r)?,
        TestFunction::univariate("-x*x", r * r, 2.0 * r)?,
        TestFunction::univariate(&format!("min(x, {c:?})"), cut, 1.0)?,
        TestFunction::univariate(&format!("max(x, {c:?})"), cut, 1.0)?,
    ])
}

fn require_bivariate(phi: &TestFunction) -> Result<()> {
    if phi.bivariate {
        Ok(())
    } else {
        Err(Error::InvalidArgument("independence needs a test function of x and y".into()))
    }
}

/// `C[i][j] = phi(a_i, b_j)`.
fn phi_matrix(phi: &TestFunction, x: &RandomVariable, y: &RandomVariable) -> Result<Vec<Vec<f64>>> {
    x.values()
        .iter()
        .map(|&a| y.values().iter().map(|&b| phi.eval2(a, b)).collect())
        .collect()
}

fn quad(c: &[Vec<f64>], theta: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, row) in c.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            s += v * theta[i] * theta[j];
        }
    }
    s
}

/// `sup_theta sum_ij phi(a_i, b_j) theta_i theta_j`.
///
/// Two states: the objective is a quadratic in `theta_1`, maximized exactly.
/// Otherwise the domain grid at `resolution` is scanned and the error is
/// bounded through the objective's Lipschitz constant.
pub fn per_theta_independent_expectation(
    phi: &TestFunction,
    x: &RandomVariable,
    y: &RandomVariable,
    d: &CredalDomain,
    resolution: usize,
) -> Result<SublinearResult> {
    require_bivariate(phi)?;
    let n = d.n_states();
    if x.len() != n || y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "random variables must have {n} states like the domain"
        )));
    }
    let c = phi_matrix(phi, x, y)?;
    let sup_c = c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let tail = 2.0 * sup_c * d.tail_mass_bound();
    let (theta, err) = if n == 2 {
        (quadratic_two_state(&c, d)?, tail)
    } else {
        let res = resolution.max(2);
        let top = d.project_interval(1, &[])?.grid(res).len();
        let parts: Vec<Option<(f64, ThetaVector)>> = (0..top)
            .into_par_iter()
            .map(|k| {
                let mut best: Option<(f64, ThetaVector)> = None;
                for t in d.grid_enumerate_from(res, k) {
                    let v = quad(&c, &t.0);
                    if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                        best = Some((v, t));
                    }
                }
                best
            })
            .collect();
        let mut best: Option<(f64, ThetaVector)> = None;
        for (v, t) in parts.into_iter().flatten() {
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, t));
            }
        }
        let (_, theta) = best.ok_or_else(|| Error::InfeasibleDomain(format!("no grid point at resolution {res}")))?;
        // Interval widths are bounded by the gap budgets, and by 1 under Enforce.
        let width = (1..n)
            .map(|i| {
                let c = d.bound(i).map_or(1.0, |b| b.gap_budget);
                if d.policy() == SimplexPolicy::Enforce {
                    c.min(1.0)
                } else {
                    c
                }
            })
            .fold(0.0, f64::max);
        let h = width / (res - 1) as f64;
        let lip = 4.0 * sup_c * (n - 1) as f64;
        (theta, lip * h + tail)
    };
    Ok(SublinearResult {
        value: quad(&c, &theta.0),
        argmax_theta: theta,
        method: if n == 2 { Method::NestedExact } else { Method::Grid },
        certified_error: err,
    })
}

fn quadratic_two_state(c: &[Vec<f64>], d: &CredalDomain) -> Result<ThetaVector> {
    let iv = d.project_interval(1, &[])?;
    if iv.is_empty() {
        return Err(Error::InfeasibleDomain("the first projection interval is empty".into()));
    }
    // q(t) = c11 t^2 + (c12 + c21) t (1 - t) + c22 (1 - t)^2 = a t^2 + b t + c22
    let s = c[0][1] + c[1][0];
    let a = c[0][0] - s + c[1][1];
    let b = s - 2.0 * c[1][1];
    let q = |t: f64| c[0][0] * t * t + s * t * (1.0 - t) + c[1][1] * (1.0 - t) * (1.0 - t);
    let mut cands = vec![iv.lo, iv.hi];
    if a < 0.0 {
        let v = -b / (2.0 * a);
        if v > iv.lo && v < iv.hi {
            cands.push(v);
        }
    }
    cands.sort_by(f64::total_cmp);
    let mut best = (cands[0], q(cands[0]));
    for &t in &cands[1..] {
        let v = q(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    Ok(d.complete(&[best.0]))
}

/// `E[ E[phi(x, Y)] at x = X ]`: the inner upper expectation is taken for
/// every value of `X` with its own supremum, then the outer one.
pub fn peng_independent_expectation(
    phi: &TestFunction,
    x: &RandomVariable,
    y: &RandomVariable,
    d: &CredalDomain,
    method: Method,
    opts: &EngineOptions,
) -> Result<SublinearResult> {
    require_bivariate(phi)?;
    let mut inner_err = 0.0f64;
    let mut psi = Vec::with_capacity(x.len());
    for &a in x.values() {
        let fy = y.try_map(|b| phi.eval2(a, b))?;
        let r = upper_expectation_with(&fy, d, method, opts)?;
        inner_err = inner_err.max(r.certified_error);
        psi.push(r.value);
    }
    let outer = upper_expectation_with(&RandomVariable::new(psi)?, d, method, opts)?;
    Ok(SublinearResult {
        certified_error: outer.certified_error + inner_err,
        ..outer
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceGap {
    pub per_theta: SublinearResult,
    pub peng: SublinearResult,
    /// `peng - per_theta`.
    pub gap: f64,
    /// `gap >= -(sum of certified errors)`.
    pub consistent: bool,
}

pub fn independence_gap(
    phi: &TestFunction,
    x: &RandomVariable,
    y: &RandomVariable,
    d: &CredalDomain,
    resolution: usize,
) -> Result<IndependenceGap> {
    let per_theta = per_theta_independent_expectation(phi, x, y, d, resolution)?;
    let opts = EngineOptions {
        grid_resolution: resolution,
        ..EngineOptions::default()
    };
    let peng = peng_independent_expectation(phi, x, y, d, Method::Auto, &opts)?;
    let gap = peng.value - per_theta.value;
    let consistent = gap >= -(peng.certified_error + per_theta.certified_error + 1e-12);
    Ok(IndependenceGap {
        per_theta,
        peng,
        gap,
        consistent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionCheck {
    pub phi: String,
    pub first: f64,
    pub second: f64,
    pub allowed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    /// Every supplied test function agreed. A necessary condition for
    /// identical distribution, not a proof of it.
    pub consistent: bool,
    pub checks: Vec<DistributionCheck>,
}

/// Compares `E1[phi(X1)]` and `E2[phi(X2)]` for every `phi` in the family.
pub fn identically_distributed_check(
    x1: &RandomVariable,
    d1: &CredalDomain,
    x2: &RandomVariable,
    d2: &CredalDomain,
    phis: &[TestFunction],
    tol: f64,
) -> Result<DistributionReport> {
    if phis.is_empty() {
        return Err(Error::InvalidArgument("the test-function family is empty".into()));
    }
    let checks = phis
        .par_iter()
        .map(|phi| {
            let f1 = x1.try_map(|v| phi.eval(v))?;
            let f2 = x2.try_map(|v| phi.eval(v))?;
            let e1 = upper_expectation_with(&f1, d1, Method::Auto, &EngineOptions::default())?;
            let e2 = upper_expectation_with(&f2, d2, Method::Auto, &EngineOptions::default())?;
            let allowed = tol + e1.certified_error + e2.certified_error;
            Ok(DistributionCheck {
                phi: phi.expr.to_string(),
                first: e1.value,
                second: e2.value,
                allowed,
                passed: (e1.value - e2.value).abs() <= allowed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistributionReport {
        consistent: checks.iter().all(|c| c.passed),
        checks,
    })
}
