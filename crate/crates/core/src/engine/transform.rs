//! Evaluation through a change of variables: the weights are given as
//! functions of `d1 .. dk` ranging over a fixed rectangle, so the iterated
//! suprema run over intervals that do not depend on each other.

use serde::{Deserialize, Serialize};

use super::{finish, objective, objective_lipschitz, EngineOptions, Method, RandomVariable, SublinearResult};
use crate::domain::{Interval, SimplexPolicy};
use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Scope};
use crate::search;
use crate::tol;

/// Pre-scan points per level. Maps such as polar coordinates make the
/// per-level objective periodic, so the scan is finer than the nested one.
const SCAN_POINTS: usize = 33;

#[derive(Debug, Clone)]
pub struct TransformSpec {
    /// The rectangle, one interval per free coordinate.
    pub rectangle: Vec<Interval>,
    /// `theta_i` as an expression in `d1 .. dk`, for `i = 1 .. n-1`.
    pub forward_map: Vec<Expr>,
    pub simplex_policy: SimplexPolicy,
}

/// JSON form: `{ "rectangle": [[lo, hi], ...], "forward_map": ["expr", ...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpecJson {
    pub rectangle: Vec<[f64; 2]>,
    pub forward_map: Vec<String>,
    #[serde(default)]
    pub simplex_policy: SimplexPolicy,
}

impl TransformSpec {
    pub fn new(rectangle: Vec<Interval>, forward_map: Vec<Expr>, simplex_policy: SimplexPolicy) -> Result<Self> {
        if rectangle.len() != forward_map.len() || rectangle.is_empty() {
            return Err(Error::InvalidSpec(format!(
                "rectangle has {} sides but forward_map has {} entries",
                rectangle.len(),
                forward_map.len()
            )));
        }
        for (k, iv) in rectangle.iter().enumerate() {
            if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.lo > iv.hi {
                return Err(Error::InvalidSpec(format!("rectangle side {} is not a finite interval", k + 1)));
            }
        }
        let dims = rectangle.len();
        if let Some(e) = forward_map.iter().find(|e| e.max_delta_index() > dims) {
            return Err(Error::InvalidSpec(format!("`{}` reads past d{dims}", e.source())));
        }
        Ok(TransformSpec {
            rectangle,
            forward_map,
            simplex_policy,
        })
    }

    pub fn from_json(spec: &TransformSpecJson) -> Result<Self> {
        let dims = spec.rectangle.len();
        let rect = spec.rectangle.iter().map(|[lo, hi]| Interval::new(*lo, *hi)).collect();
        let map = spec
            .forward_map
            .iter()
            .map(|s| Expr::parse(s, Scope::transform(dims)))
            .collect::<Result<Vec<_>>>()?;
        TransformSpec::new(rect, map, spec.simplex_policy)
    }

    pub fn n_states(&self) -> usize {
        self.forward_map.len() + 1
    }

    /// True when `theta_i` reads only `d1 .. di`. Not required for
    /// evaluation: the polar map of a disc is not triangular.
    pub fn is_triangular(&self) -> bool {
        self.forward_map.iter().enumerate().all(|(k, e)| e.max_delta_index() <= k + 1)
    }

    /// Free weights at a rectangle point.
    pub fn forward(&self, delta: &[f64]) -> Result<Vec<f64>> {
        let env = Env {
            indexed: delta,
            ..Env::default()
        };
        self.forward_map.iter().map(|e| e.eval(&env)).collect()
    }

    /// Free weights, or `None` if they violate the simplex under `Enforce`.
    fn feasible_forward(&self, delta: &[f64]) -> Result<Option<Vec<f64>>> {
        let free = self.forward(delta)?;
        if self.simplex_policy == SimplexPolicy::Enforce {
            let residual = 1.0 - free.iter().sum::<f64>();
            if residual < -tol::SIMPLEX_SUM || free.iter().any(|&t| t < -tol::MEMBERSHIP) {
                return Ok(None);
            }
        }
        Ok(Some(free))
    }
}

/// `sup` of `E_theta[X]` with `theta = T(delta)` over the rectangle.
/// `Method::Transform` (or `Auto`) runs nested one-dimensional searches;
/// `Method::Grid` scans the rectangle.
pub fn transform_eval(x: &RandomVariable, t: &TransformSpec, method: Method) -> Result<SublinearResult> {
    transform_eval_with(x, t, method, &EngineOptions::default())
}

pub fn transform_eval_with(
    x: &RandomVariable,
    t: &TransformSpec,
    method: Method,
    opts: &EngineOptions,
) -> Result<SublinearResult> {
    if x.len() != t.n_states() {
        return Err(Error::InvalidArgument(format!(
            "random variable has {} states, transform describes {}",
            x.len(),
            t.n_states()
        )));
    }
    let mut walk = Walk {
        values: x.values(),
        t,
        error: None,
    };
    let mut delta = Vec::with_capacity(t.rectangle.len());
    let (best, err) = match method {
        Method::Transform | Method::Auto => {
            walk.search(0, &mut delta);
            let mut arg = Vec::with_capacity(t.rectangle.len());
            for k in 0..t.rectangle.len() {
                match walk.best_at(k, &mut arg) {
                    Some((d, _)) => arg.push(d),
                    None => break,
                }
            }
            let dims = t.rectangle.len() as f64;
            (arg, objective_lipschitz(x) * tol::GOLDEN_XTOL * dims)
        }
        Method::Grid => {
            let mut best = (f64::NEG_INFINITY, Vec::new());
            walk.grid(0, opts.grid_resolution.max(2), &mut delta, &mut best);
            (best.1, f64::NAN)
        }
        other => {
            return Err(Error::MethodUnsupported(format!(
                "transform_eval supports transform and grid, not {other}"
            )))
        }
    };
    if let Some(e) = walk.error {
        return Err(e);
    }
    if best.len() != t.rectangle.len() {
        return Err(Error::InfeasibleDomain("the transform maps no rectangle point into the simplex".into()));
    }
    let free = t.forward(&best)?;
    let theta = crate::domain::ThetaVector::from_free(&free);
    let err = if err.is_nan() {
        // Grid: crude sup-norm Lipschitz bound of the map is not known, so
        // report the objective bound times the largest rectangle spacing.
        let h = t
            .rectangle
            .iter()
            .map(|iv| iv.spacing(opts.grid_resolution.max(2)))
            .fold(0.0, f64::max);
        objective_lipschitz(x) * h
    } else {
        err
    };
    let mut r = finish(x, theta, Method::Transform, err);
    if method == Method::Grid {
        r.method = Method::Grid;
    }
    Ok(r)
}

struct Walk<'a> {
    values: &'a [f64],
    t: &'a TransformSpec,
    error: Option<Error>,
}

impl Walk<'_> {
    fn leaf(&mut self, delta: &[f64]) -> f64 {
        match self.t.feasible_forward(delta) {
            Ok(Some(free)) => objective(self.values, &free),
            Ok(None) => f64::NEG_INFINITY,
            Err(e) => {
                self.error.get_or_insert(e);
                f64::NEG_INFINITY
            }
        }
    }

    fn search(&mut self, k: usize, delta: &mut Vec<f64>) -> f64 {
        self.best_at(k, delta).map(|(_, v)| v).unwrap_or(f64::NEG_INFINITY)
    }

    fn best_at(&mut self, k: usize, delta: &mut Vec<f64>) -> Option<(f64, f64)> {
        let iv = self.t.rectangle[k];
        let last = k + 1 == self.t.rectangle.len();
        let m = search::maximize(
            |d| {
                delta.push(d);
                let v = if last { self.leaf(delta) } else { self.search(k + 1, delta) };
                delta.pop();
                v
            },
            iv.lo,
            iv.hi,
            SCAN_POINTS,
        )?;
        Some((m.x, m.value))
    }

    fn grid(&mut self, k: usize, res: usize, delta: &mut Vec<f64>, best: &mut (f64, Vec<f64>)) {
        for d in self.t.rectangle[k].grid(res) {
            delta.push(d);
            if k + 1 == self.t.rectangle.len() {
                let v = self.leaf(delta);
                if v > best.0 {
                    *best = (v, delta.clone());
                }
            } else {
                self.grid(k + 1, res, delta, best);
            }
            delta.pop();
        }
    }
}
