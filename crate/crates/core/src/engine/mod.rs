//! Upper and lower expectations over a [`CredalDomain`].
//!
//! `E[X] = sup_{theta in D} sum_i a_i theta_i`, evaluated by one of:
//!
//! * [`Method::NestedExact`]: affine bounds only; the optimum sits at a
//!   vertex of the polytope cut out by the nested constraints.
//! * [`Method::NestedNumeric`]: iterated one-dimensional maximization over
//!   the nested projection intervals, falling back to the grid when a level
//!   cannot be certified.
//! * [`Method::Grid`]: the brute-force grid oracle.
//!
//! Lower expectations are computed as `-E[-X]` on the same code path.

mod axioms;
mod exact;
mod nested;
mod oracle;
mod transform;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use axioms::{axiom_check, axiom_check_with, AxiomOutcome, AxiomReport};
pub use oracle::brute_force_oracle;
pub use transform::{transform_eval, transform_eval_with, TransformSpec, TransformSpecJson};

use crate::domain::{CredalDomain, ThetaVector};
use crate::error::{Error, Result};

/// Values `a_i = X(omega_i)` on the truncated state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RvSpec", into = "RvSpec")]
pub struct RandomVariable {
    values: Vec<f64>,
}

/// JSON form `{ "values": [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvSpec {
    pub values: Vec<f64>,
}

impl TryFrom<RvSpec> for RandomVariable {
    type Error = Error;

    fn try_from(spec: RvSpec) -> Result<Self> {
        RandomVariable::new(spec.values)
    }
}

impl From<RandomVariable> for RvSpec {
    fn from(x: RandomVariable) -> Self {
        RvSpec { values: x.values }
    }
}

impl RandomVariable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("random variable has no states".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("value at state {} is not finite", k + 1)));
        }
        Ok(RandomVariable { values })
    }

    pub fn constant(c: f64, n: usize) -> Self {
        RandomVariable { values: vec![c; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sup |X|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        RandomVariable::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn try_map(&self, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        RandomVariable::new(self.values.iter().map(|&v| f(v)).collect::<Result<_>>()?)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::InvalidArgument("random variables differ in length".into()));
        }
        RandomVariable::new(self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn neg(&self) -> Self {
        RandomVariable {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn scale(&self, lambda: f64) -> Self {
        RandomVariable {
            values: self.values.iter().map(|v| lambda * v).collect(),
        }
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.len() == other.len() && self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `NestedExact` for affine domains, `NestedNumeric` otherwise.
    Auto,
    NestedExact,
    NestedNumeric,
    Grid,
    Transform,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::NestedExact => "nested_exact",
            Method::NestedNumeric => "nested_numeric",
            Method::Grid => "grid",
            Method::Transform => "transform",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "auto" => Method::Auto,
            "nested_exact" => Method::NestedExact,
            "nested_numeric" => Method::NestedNumeric,
            "grid" => Method::Grid,
            "transform" => Method::Transform,
            _ => return Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublinearResult {
    pub value: f64,
    #[serde(rename = "argmax")]
    pub argmax_theta: ThetaVector,
    pub method: Method,
    pub certified_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    /// Grid resolution used by `Method::Grid` and by the numeric fallback.
    pub grid_resolution: usize,
    /// Pre-scan points per level of the nested numeric search.
    pub scan_points: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            grid_resolution: 501,
            scan_points: 9,
        }
    }
}

/// `sup_{theta in D} E_theta[X]` with default options.
pub fn upper_expectation(x: &RandomVariable, d: &CredalDomain, method: Method) -> Result<SublinearResult> {
    upper_expectation_with(x, d, method, &EngineOptions::default())
}

pub fn upper_expectation_with(
    x: &RandomVariable,
    d: &CredalDomain,
    method: Method,
    opts: &EngineOptions,
) -> Result<SublinearResult> {
    check_len(x, d)?;
    match method {
        Method::Auto => {
            if d.is_affine() {
                exact::nested_exact(x, d)
            } else {
                nested::nested_numeric(x, d, opts)
            }
        }
        Method::NestedExact => exact::nested_exact(x, d),
        Method::NestedNumeric => nested::nested_numeric(x, d, opts),
        Method::Grid => {
            let r = brute_force_oracle(x, d, opts.grid_resolution);
            if r.value.is_finite() {
                Ok(r)
            } else {
                Err(Error::InfeasibleDomain(format!(
                    "no grid point at resolution {}",
                    opts.grid_resolution
                )))
            }
        }
        Method::Transform => Err(Error::MethodUnsupported(
            "the transform method needs a transform spec; use transform_eval".into(),
        )),
    }
}

/// `inf_{theta in D} E_theta[X] = -E[-X]`.
pub fn lower_expectation(x: &RandomVariable, d: &CredalDomain, method: Method) -> Result<SublinearResult> {
    lower_expectation_with(x, d, method, &EngineOptions::default())
}

pub fn lower_expectation_with(
    x: &RandomVariable,
    d: &CredalDomain,
    method: Method,
    opts: &EngineOptions,
) -> Result<SublinearResult> {
    let r = upper_expectation_with(&x.neg(), d, method, opts)?;
    Ok(SublinearResult {
        value: -r.value,
        ..r
    })
}

fn check_len(x: &RandomVariable, d: &CredalDomain) -> Result<()> {
    if x.len() != d.n_states() {
        return Err(Error::InvalidArgument(format!(
            "random variable has {} states, domain has {}",
            x.len(),
            d.n_states()
        )));
    }
    Ok(())
}

/// `E_theta[X]` over the free coordinates, with the residual weight
/// `1 - sum(free)` on the last state.
pub(crate) fn objective(values: &[f64], free: &[f64]) -> f64 {
    let last = values[values.len() - 1];
    last + free
        .iter()
        .zip(values)
        .map(|(t, a)| (a - last) * t)
        .sum::<f64>()
}

/// Crude Lipschitz constant of the objective in the free coordinates
/// (sup-norm): each partial derivative `a_i - a_n` is at most `2 max|a|`.
pub(crate) fn objective_lipschitz(x: &RandomVariable) -> f64 {
    2.0 * x.sup_norm() * (x.len() - 1) as f64
}

pub(crate) fn tail_error(x: &RandomVariable, d: &CredalDomain) -> f64 {
    x.sup_norm() * d.tail_mass_bound()
}

/// Result with the value recomputed as `sum a_i theta_i` at the argmax.
pub(crate) fn finish(x: &RandomVariable, theta: ThetaVector, method: Method, certified_error: f64) -> SublinearResult {
    SublinearResult {
        value: theta.dot(x.values()),
        argmax_theta: theta,
        method,
        certified_error,
    }
}
