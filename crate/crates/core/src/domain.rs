//! Convex compact domains of probability weight vectors described by nested
//! bounds `lower_i(t1..t{i-1}) <= t_i <= upper_i(t1..t{i-1})`.
//!
//! A domain over `n` states has free coordinates `1..n-1`; the last weight is
//! the residual `1 - sum`. An optional bound for index `n` constrains that
//! residual and may reference `t1 .. t{n-2}` only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Scope};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplexPolicy {
    /// Every coordinate is clamped to the remaining mass; weights are a true
    /// probability vector.
    #[default]
    Enforce,
    /// Only the declared bounds apply; the residual weight may go negative.
    PaperFaithful,
}

#[derive(Debug, Clone)]
pub struct BoundPair {
    pub lower: Expr,
    pub upper: Expr,
    /// Declared `c_i >= upper - lower`.
    pub gap_budget: f64,
}

impl BoundPair {
    pub fn new(lower: Expr, upper: Expr, gap_budget: f64) -> Self {
        BoundPair {
            lower,
            upper,
            gap_budget,
        }
    }

    /// Constant bounds `[lo, hi]` with budget `hi - lo`.
    pub fn constant(lo: f64, hi: f64) -> Self {
        BoundPair::new(Expr::constant(lo), Expr::constant(hi), (hi - lo).max(0.0))
    }
}

/// A closed interval; `lo > hi` means empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn contains(&self, v: f64, slack: f64) -> bool {
        !self.is_empty() && v >= self.lo - slack && v <= self.hi + slack
    }

    /// `resolution` equally spaced points from `lo` to `hi` inclusive; a
    /// degenerate interval yields its single point.
    pub fn grid(&self, resolution: usize) -> Vec<f64> {
        if self.is_empty() {
            return Vec::new();
        }
        if self.hi - self.lo <= f64::EPSILON * self.lo.abs().max(1.0) || resolution < 2 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (resolution - 1) as f64;
        let mut pts: Vec<f64> = (0..resolution).map(|k| self.lo + k as f64 * step).collect();
        pts[resolution - 1] = self.hi;
        pts
    }

    /// Grid spacing used by [`Interval::grid`].
    pub fn spacing(&self, resolution: usize) -> f64 {
        if self.is_empty() || resolution < 2 {
            0.0
        } else {
            self.width() / (resolution - 1) as f64
        }
    }
}

/// A probability weight vector over all `n` states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaVector(pub Vec<f64>);

impl ThetaVector {
    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, values: &[f64]) -> f64 {
        self.0.iter().zip(values).map(|(t, a)| t * a).sum()
    }

    /// Completes free coordinates with the residual weight `1 - sum`.
    pub fn from_free(free: &[f64]) -> Self {
        let mut w = free.to_vec();
        w.push(1.0 - free.iter().sum::<f64>());
        ThetaVector(w)
    }
}

/// JSON description of a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub n_states: usize,
    pub bounds: Vec<BoundSpec>,
    #[serde(default)]
    pub simplex_policy: SimplexPolicy,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub tail_mass_bound: f64,
    /// User assertion that lower bounds are convex and upper bounds concave.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub declared_convex: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub lower: String,
    pub upper: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone)]
pub struct CredalDomain {
    n_states: usize,
    bounds: Vec<BoundPair>,
    last: Option<BoundPair>,
    policy: SimplexPolicy,
    tail_mass_bound: f64,
    declared_convex: bool,
}

/// Parses and validates a domain description.
pub fn build_domain(spec: &DomainSpec) -> Result<CredalDomain> {
    let n = spec.n_states;
    if n < 2 {
        return Err(Error::InvalidSpec(format!("n_states must be >= 2, got {n}")));
    }
    if spec.bounds.len() != n - 1 && spec.bounds.len() != n {
        return Err(Error::InvalidSpec(format!(
            "expected {} or {} bounds for {} states, got {}",
            n - 1,
            n,
            n,
            spec.bounds.len()
        )));
    }
    let mut pairs = Vec::with_capacity(spec.bounds.len());
    for (k, b) in spec.bounds.iter().enumerate() {
        let index = k + 1;
        // The residual bound may not read t{n-1}: it is folded into I_{n-1}.
        let scope = Scope::bound(if index == n { n - 1 } else { index });
        let lower = Expr::parse(&b.lower, scope)?;
        let upper = Expr::parse(&b.upper, scope)?;
        let c = b.c.unwrap_or(1.0);
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidSpec(format!("bound {index}: c must be finite and >= 0")));
        }
        pairs.push(BoundPair::new(lower, upper, c));
    }
    let mut d = CredalDomain::new(n, pairs, spec.simplex_policy)?;
    if !spec.tail_mass_bound.is_finite() || spec.tail_mass_bound < 0.0 {
        return Err(Error::InvalidSpec("tail_mass_bound must be finite and >= 0".into()));
    }
    d.tail_mass_bound = spec.tail_mass_bound;
    d.declared_convex = spec.declared_convex;
    Ok(d)
}

impl CredalDomain {
    /// Builds and validates a domain. `bounds` has `n_states - 1` entries, or
    /// `n_states` when the residual weight is bounded too.
    pub fn new(n_states: usize, mut bounds: Vec<BoundPair>, policy: SimplexPolicy) -> Result<Self> {
        if n_states < 2 {
            return Err(Error::InvalidSpec(format!("n_states must be >= 2, got {n_states}")));
        }
        if bounds.len() != n_states - 1 && bounds.len() != n_states {
            return Err(Error::InvalidSpec(format!(
                "expected {} or {} bounds, got {}",
                n_states - 1,
                n_states,
                bounds.len()
            )));
        }
        let last = if bounds.len() == n_states {
            bounds.pop()
        } else {
            None
        };
        for (k, b) in bounds.iter().enumerate() {
            let limit = k + 1;
            if b.lower.max_theta_index() >= limit || b.upper.max_theta_index() >= limit {
                return Err(Error::InvalidSpec(format!(
                    "bound {limit} may only reference t1..t{}",
                    limit - 1
                )));
            }
        }
        if let Some(b) = &last {
            if b.lower.max_theta_index() >= n_states - 1 || b.upper.max_theta_index() >= n_states - 1 {
                return Err(Error::InvalidSpec(format!(
                    "residual bound may only reference t1..t{}",
                    n_states.saturating_sub(2)
                )));
            }
        }
        let d = CredalDomain {
            n_states,
            bounds,
            last,
            policy,
            tail_mass_bound: 0.0,
            declared_convex: false,
        };
        d.probe()?;
        Ok(d)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Number of free coordinates, `n_states - 1`.
    pub fn free_dims(&self) -> usize {
        self.n_states - 1
    }

    pub fn policy(&self) -> SimplexPolicy {
        self.policy
    }

    pub fn with_policy(&self, policy: SimplexPolicy) -> Result<Self> {
        let mut all = self.bounds.clone();
        all.extend(self.last.clone());
        let mut d = CredalDomain::new(self.n_states, all, policy)?;
        d.tail_mass_bound = self.tail_mass_bound;
        d.declared_convex = self.declared_convex;
        Ok(d)
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    pub fn with_tail_mass_bound(mut self, eps: f64) -> Self {
        self.tail_mass_bound = eps;
        self
    }

    pub fn declared_convex(&self) -> bool {
        self.declared_convex
    }

    pub fn with_declared_convex(mut self, declared: bool) -> Self {
        self.declared_convex = declared;
        self
    }

    /// Bound pair for coordinate `index` (1-based), including the residual bound.
    pub fn bound(&self, index: usize) -> Option<&BoundPair> {
        if index >= 1 && index < self.n_states {
            self.bounds.get(index - 1)
        } else if index == self.n_states {
            self.last.as_ref()
        } else {
            None
        }
    }

    pub fn residual_bound(&self) -> Option<&BoundPair> {
        self.last.as_ref()
    }

    /// True when every bound is affine in the weights.
    pub fn is_affine(&self) -> bool {
        let dims = self.free_dims();
        self.bounds
            .iter()
            .chain(self.last.iter())
            .all(|b| b.lower.affine_form(dims).is_some() && b.upper.affine_form(dims).is_some())
    }

    /// Feasible interval for coordinate `index` given the earlier coordinates.
    ///
    /// For `index < n` this is `[lower, upper]`, intersected with
    /// `[0, 1 - sum(prefix)]` under [`SimplexPolicy::Enforce`], and for
    /// `index = n - 1` also with whatever keeps the residual inside its bound.
    /// For `index = n` it is the residual point itself (or empty).
    pub fn project_interval(&self, index: usize, prefix: &[f64]) -> Result<Interval> {
        if index == 0 || index > self.n_states {
            return Err(Error::InvalidArgument(format!(
                "index {index} outside 1..={}",
                self.n_states
            )));
        }
        if prefix.len() != index - 1 {
            return Err(Error::InvalidArgument(format!(
                "prefix for index {index} must have {} entries, got {}",
                index - 1,
                prefix.len()
            )));
        }
        let used: f64 = prefix.iter().sum();
        let remaining = 1.0 - used;
        let (mut lo, mut hi) = if index == self.n_states {
            let (mut lo, mut hi) = (remaining, remaining);
            if let Some(b) = &self.last {
                let (l, u) = (b.lower.eval_prefix(prefix)?, b.upper.eval_prefix(prefix)?);
                if remaining < l - tol::MEMBERSHIP || remaining > u + tol::MEMBERSHIP {
                    return Ok(Interval::EMPTY);
                }
            }
            if self.policy == SimplexPolicy::Enforce && remaining < -tol::SIMPLEX_SUM {
                return Ok(Interval::EMPTY);
            }
            if self.policy == SimplexPolicy::Enforce {
                lo = lo.max(0.0);
                hi = hi.max(0.0);
            }
            (lo, hi)
        } else {
            let b = &self.bounds[index - 1];
            let mut lo = b.lower.eval_prefix(prefix)?;
            let mut hi = b.upper.eval_prefix(prefix)?;
            if self.policy == SimplexPolicy::Enforce {
                lo = lo.max(0.0);
                hi = hi.min(remaining);
            }
            if index == self.n_states - 1 {
                if let Some(last) = &self.last {
                    let l = last.lower.eval_prefix(prefix)?;
                    let u = last.upper.eval_prefix(prefix)?;
                    lo = lo.max(remaining - u);
                    hi = hi.min(remaining - l);
                }
            }
            (lo, hi)
        };
        if lo > hi {
            if lo - hi > tol::BOUND_ORDER {
                return Ok(Interval::EMPTY);
            }
            // Rounding noise around a single feasible point.
            hi = lo;
        }
        lo = lo.min(hi);
        Ok(Interval::new(lo, hi))
    }

    /// Membership test with slack `tol` on every coordinate and (under
    /// `Enforce`) on the unit sum.
    pub fn contains(&self, theta: &ThetaVector, tol: f64) -> bool {
        let w = theta.weights();
        if w.len() != self.n_states || w.iter().any(|v| !v.is_finite()) {
            return false;
        }
        if self.policy == SimplexPolicy::Enforce {
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > tol.max(tol::SIMPLEX_SUM) || w.iter().any(|&v| v < -tol) {
                return false;
            }
        }
        for index in 1..self.n_states {
            match self.raw_interval(index, &w[..index - 1]) {
                Ok(iv) if iv.contains(w[index - 1], tol) => {}
                _ => return false,
            }
        }
        if let Some(b) = &self.last {
            let prefix = &w[..self.n_states - 2];
            let residual = w[self.n_states - 1];
            match (b.lower.eval_prefix(prefix), b.upper.eval_prefix(prefix)) {
                (Ok(l), Ok(u)) if residual >= l - tol && residual <= u + tol => {}
                _ => return false,
            }
        }
        true
    }

    /// Bounds for `index < n` with only the declared constraints; the
    /// simplex conditions are checked separately by `contains`.
    fn raw_interval(&self, index: usize, prefix: &[f64]) -> Result<Interval> {
        let b = &self.bounds[index - 1];
        Ok(Interval::new(b.lower.eval_prefix(prefix)?, b.upper.eval_prefix(prefix)?))
    }

    /// Deterministic depth-first stream of grid points.
    pub fn grid_enumerate(&self, resolution: usize) -> GridIter<'_> {
        GridIter::new(self, resolution.max(2), None)
    }

    /// Grid points whose first coordinate is the `top`-th point of `I_1`.
    pub fn grid_enumerate_from(&self, resolution: usize, top: usize) -> GridIter<'_> {
        GridIter::new(self, resolution.max(2), Some(top))
    }

    /// Completes a free-coordinate vector into a full weight vector.
    pub fn complete(&self, free: &[f64]) -> ThetaVector {
        let mut t = ThetaVector::from_free(free);
        if self.policy == SimplexPolicy::Enforce {
            if let Some(last) = t.0.last_mut() {
                if *last < 0.0 && *last > -tol::SIMPLEX_SUM {
                    *last = 0.0;
                }
            }
        }
        t
    }

    /// Walks the probe grid, checking bound order and gap budgets at every
    /// visited prefix and confirming at least one feasible point.
    fn probe(&self) -> Result<()> {
        const CHECK_BUDGET: usize = 200_000;
        const HARD_CAP: usize = 5_000_000;
        let mut visited = 0usize;
        let mut found = [1.0, 0.0, 0.5].into_iter().any(|f| self.greedy_feasible(f));
        let mut prefix = Vec::with_capacity(self.n_states);
        self.probe_level(1, &mut prefix, &mut visited, &mut found, CHECK_BUDGET, HARD_CAP)?;
        if found {
            Ok(())
        } else {
            Err(Error::InfeasibleDomain(format!(
                "no feasible point found on the probe grid (resolution {})",
                tol::PROBE_RESOLUTION
            )))
        }
    }

    /// Descends taking the point at fraction `f` of every projection
    /// interval; true if this reaches a feasible point.
    fn greedy_feasible(&self, f: f64) -> bool {
        let mut prefix = Vec::with_capacity(self.n_states);
        for index in 1..=self.n_states {
            match self.project_interval(index, &prefix) {
                Ok(iv) if !iv.is_empty() => prefix.push(iv.lo + f * (iv.hi - iv.lo)),
                _ => return false,
            }
        }
        true
    }

    fn probe_level(
        &self,
        index: usize,
        prefix: &mut Vec<f64>,
        visited: &mut usize,
        found: &mut bool,
        budget: usize,
        cap: usize,
    ) -> Result<()> {
        if (*found && *visited >= budget) || *visited >= cap {
            return Ok(());
        }
        *visited += 1;
        if let Some(b) = self.bound(index) {
            let eval_prefix = if index == self.n_states {
                &prefix[..self.n_states - 2]
            } else {
                &prefix[..]
            };
            let l = b.lower.eval_prefix(eval_prefix)?;
            let u = b.upper.eval_prefix(eval_prefix)?;
            if l > u + tol::BOUND_ORDER {
                return Err(Error::BoundOrderViolation {
                    index,
                    lower: l,
                    upper: u,
                    prefix: prefix.clone(),
                });
            }
            if u - l > b.gap_budget + tol::BOUND_ORDER {
                return Err(Error::GapBudgetViolation {
                    index,
                    gap: u - l,
                    budget: b.gap_budget,
                });
            }
        }
        if index == self.n_states {
            if !self.project_interval(index, prefix)?.is_empty() {
                *found = true;
            }
            return Ok(());
        }
        let iv = self.project_interval(index, prefix)?;
        for v in iv.grid(tol::PROBE_RESOLUTION) {
            prefix.push(v);
            let r = self.probe_level(index + 1, prefix, visited, found, budget, cap);
            prefix.pop();
            r?;
            if (*found && *visited >= budget) || *visited >= cap {
                break;
            }
        }
        Ok(())
    }

    /// Numerical convexity cross-check: midpoints of pairs of grid points
    /// must stay inside the domain.
    pub fn convexity_probe(&self, resolution: usize, max_pairs: usize) -> ConvexityProbe {
        let pts: Vec<ThetaVector> = self.grid_enumerate(resolution).collect();
        let mut report = ConvexityProbe::default();
        if pts.len() < 2 {
            return report;
        }
        let stride = ((pts.len() * pts.len()) / max_pairs.max(1)).max(1);
        let mut counter = 0usize;
        'outer: for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                counter += 1;
                if !counter.is_multiple_of(stride) {
                    continue;
                }
                for lambda in [0.25, 0.5, 0.75] {
                    let mix = ThetaVector(
                        a.0.iter()
                            .zip(&b.0)
                            .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
                            .collect(),
                    );
                    report.checked += 1;
                    if !self.contains(&mix, tol::MEMBERSHIP) {
                        report.violations += 1;
                        if report.witness.is_none() {
                            report.witness = Some(mix);
                        }
                    }
                }
                if report.checked >= max_pairs * 3 {
                    break 'outer;
                }
            }
        }
        report
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvexityProbe {
    pub checked: usize,
    pub violations: usize,
    pub witness: Option<ThetaVector>,
}

/// Depth-first grid stream; infeasible branches (empty intervals or bound
/// evaluation errors) are pruned.
pub struct GridIter<'a> {
    domain: &'a CredalDomain,
    resolution: usize,
    // Per level: candidate values and the next position to take.
    stack: Vec<(Vec<f64>, usize)>,
    prefix: Vec<f64>,
    started: bool,
    only_top: Option<usize>,
}

impl<'a> GridIter<'a> {
    fn new(domain: &'a CredalDomain, resolution: usize, only_top: Option<usize>) -> Self {
        GridIter {
            domain,
            resolution,
            stack: Vec::new(),
            prefix: Vec::new(),
            started: false,
            only_top,
        }
    }

    fn level_points(&self, index: usize) -> Vec<f64> {
        match self.domain.project_interval(index, &self.prefix) {
            Ok(iv) => iv.grid(self.resolution),
            Err(_) => Vec::new(),
        }
    }
}

impl Iterator for GridIter<'_> {
    type Item = ThetaVector;

    fn next(&mut self) -> Option<ThetaVector> {
        let free = self.domain.free_dims();
        if !self.started {
            self.started = true;
            let mut top = self.level_points(1);
            if let Some(k) = self.only_top {
                top = top.get(k).map(|&v| vec![v]).unwrap_or_default();
            }
            self.stack.push((top, 0));
        }
        loop {
            let depth = self.stack.len();
            if depth == 0 {
                return None;
            }
            let (points, pos) = self.stack.last_mut().expect("non-empty stack");
            if *pos >= points.len() {
                self.stack.pop();
                self.prefix.pop();
                continue;
            }
            let v = points[*pos];
            *pos += 1;
            // prefix holds values for levels < depth.
            self.prefix.truncate(depth - 1);
            self.prefix.push(v);
            if depth == free {
                let residual_ok = self
                    .domain
                    .project_interval(free + 1, &self.prefix)
                    .map(|iv| !iv.is_empty())
                    .unwrap_or(false);
                if residual_ok {
                    return Some(self.domain.complete(&self.prefix));
                }
                continue;
            }
            let next = self.level_points(depth + 1);
            self.stack.push((next, 0));
        }
    }
}

/// Smallest `N` with `sum_{i >= N} (lower_i + c_i) < epsilon`.
///
/// `budgets[k]` and `lower_values[k]` describe state `k + 1`; `remainder`
/// bounds the sum of both sequences beyond the supplied entries. `N` ranges
/// over `1 ..= len + 1`.
pub fn tail_truncation(
    budgets: &[f64],
    lower_values: &[f64],
    remainder: f64,
    epsilon: f64,
) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be > 0".into()));
    }
    if budgets.len() != lower_values.len() {
        return Err(Error::InvalidArgument(
            "budget and lower-bound sequences differ in length".into(),
        ));
    }
    if !(remainder >= 0.0) || budgets.iter().chain(lower_values).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "tail sequences must be finite and nonnegative".into(),
        ));
    }
    let len = budgets.len();
    // suffix[k] = sum over states k+1.. plus the remainder.
    let mut suffix = vec![remainder; len + 1];
    for k in (0..len).rev() {
        suffix[k] = suffix[k + 1] + budgets[k] + lower_values[k];
    }
    suffix
        .iter()
        .position(|&s| s < epsilon)
        .map(|k| k + 1)
        .ok_or(Error::NoSuchN { epsilon })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, bounds: &[(&str, &str)]) -> DomainSpec {
        DomainSpec {
            n_states: n,
            bounds: bounds
                .iter()
                .map(|(l, u)| BoundSpec {
                    lower: l.to_string(),
                    upper: u.to_string(),
                    c: None,
                })
                .collect(),
            simplex_policy: SimplexPolicy::Enforce,
            tail_mass_bound: 0.0,
            declared_convex: false,
        }
    }

    fn two_state() -> CredalDomain {
        build_domain(&spec(2, &[("0.2", "0.5")])).unwrap()
    }

    fn three_state() -> CredalDomain {
        build_domain(&spec(3, &[("0", "0.5"), ("0", "0.5 - t1")])).unwrap()
    }

    #[test]
    fn builds_example_domains() {
        assert_eq!(two_state().n_states(), 2);
        assert_eq!(three_state().free_dims(), 2);
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        let err = build_domain(&spec(2, &[("0.7", "0.6")])).unwrap_err();
        assert!(matches!(err, Error::BoundOrderViolation { index: 1, .. }), "{err:?}");
    }

    #[test]
    fn infeasible_mass_is_rejected() {
        let err = build_domain(&spec(3, &[("0.6", "0.7"), ("0.5", "0.6")])).unwrap_err();
        assert!(matches!(err, Error::InfeasibleDomain(_)), "{err:?}");
    }

    #[test]
    fn gap_budget_is_checked() {
        let mut s = spec(2, &[("0.2", "0.5")]);
        s.bounds[0].c = Some(0.1);
        assert!(matches!(
            build_domain(&s),
            Err(Error::GapBudgetViolation { index: 1, .. })
        ));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(build_domain(&spec(1, &[])).is_err());
        assert!(build_domain(&spec(3, &[("0", "1")])).is_err());
        assert!(matches!(
            build_domain(&spec(3, &[("0", "0.5"), ("0", "t2")])),
            Err(Error::VariableOutOfScope { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let d = two_state();
        assert_eq!(d.project_interval(1, &[]).unwrap(), Interval::new(0.2, 0.5));
        let d = three_state();
        let iv = d.project_interval(2, &[0.3]).unwrap();
        assert_eq!(iv.lo, 0.0);
        assert!((iv.hi - 0.2).abs() < 1e-15);
    }

    #[test]
    fn projection_with_no_remaining_mass() {
        let d = build_domain(&spec(3, &[("0", "1"), ("0", "1")])).unwrap();
        assert_eq!(d.project_interval(2, &[1.0]).unwrap(), Interval::new(0.0, 0.0));
        assert!(d.project_interval(2, &[]).is_err());
    }

    #[test]
    fn paper_faithful_skips_mass_clamp() {
        let d = build_domain(&DomainSpec {
            simplex_policy: SimplexPolicy::PaperFaithful,
            ..spec(3, &[("0", "0.5"), ("0", "sqrt(t1)")])
        })
        .unwrap();
        let iv = d.project_interval(2, &[0.5]).unwrap();
        assert!((iv.hi - 0.5f64.sqrt()).abs() < 1e-15);
        let enforced = d.with_policy(SimplexPolicy::Enforce).unwrap();
        assert_eq!(enforced.project_interval(2, &[0.5]).unwrap().hi, 0.5);
    }

    #[test]
    fn membership_examples() {
        let d = two_state();
        assert!(d.contains(&ThetaVector(vec![0.3, 0.7]), 1e-9));
        assert!(!d.contains(&ThetaVector(vec![0.6, 0.4]), 1e-9));
        assert!(!d.contains(&ThetaVector(vec![0.3, 0.6]), 1e-9));
        let d = three_state();
        assert!(d.contains(&ThetaVector(vec![0.3, 0.2, 0.5]), 1e-9));
        assert!(!d.contains(&ThetaVector(vec![0.3, 0.25, 0.45]), 1e-9));
        assert!(!d.contains(&ThetaVector(vec![0.3, 0.2]), 1e-9));
    }

    #[test]
    fn grid_examples() {
        let pts: Vec<_> = two_state().grid_enumerate(4).collect();
        let firsts: Vec<f64> = pts.iter().map(|t| t.0[0]).collect();
        let want = [0.2, 0.3, 0.4, 0.5];
        assert_eq!(firsts.len(), 4);
        for (g, w) in firsts.iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }
        for t in &pts {
            assert!((t.0[0] + t.0[1] - 1.0).abs() < 1e-15);
        }
        let ends: Vec<f64> = two_state().grid_enumerate(2).map(|t| t.0[0]).collect();
        assert_eq!(ends, vec![0.2, 0.5]);
    }

    #[test]
    fn grid_prunes_infeasible_branches() {
        // theta2 in [0.5, 0.8] runs out of mass once t1 > 0.5.
        let d = build_domain(&spec(3, &[("0", "1"), ("0.5", "0.8")])).unwrap();
        let pts: Vec<_> = d.grid_enumerate(5).collect();
        assert!(pts.iter().all(|t| t.0[0] <= 0.5 + 1e-12));
        assert!(pts.iter().all(|t| d.contains(t, 1e-9)));
        // t1 in {0, .25, .5}: 5 + 5 + 1 points.
        assert_eq!(pts.len(), 11);
    }

    #[test]
    fn thin_feasible_slab_is_found() {
        // Only t1 close to 1 - sum(rest) is feasible; the first probe
        // branches all start at t1 = 0.5.
        let mut b: Vec<(String, String)> = vec![("0.5".into(), "1".into())];
        for i in 2..=10 {
            b.push(("0".into(), format!("{}", 0.5f64.powi(i))));
        }
        let refs: Vec<(&str, &str)> = b.iter().map(|(l, u)| (l.as_str(), u.as_str())).collect();
        let d = build_domain(&spec(10, &refs)).unwrap();
        assert!(d.contains(&ThetaVector(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 1e-12));
    }

    #[test]
    fn grid_order_is_lexicographic() {
        let pts: Vec<_> = three_state().grid_enumerate(5).collect();
        for w in pts.windows(2) {
            let (a, b) = (&w[0].0, &w[1].0);
            assert!(a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]));
        }
        let split: Vec<_> = (0..5)
            .flat_map(|k| three_state().grid_enumerate_from(5, k).collect::<Vec<_>>())
            .collect();
        assert_eq!(split, pts);
    }

    #[test]
    fn residual_bound_is_folded() {
        // theta3 in [0.1, 0.2] forces t1 + t2 in [0.8, 0.9].
        let d = build_domain(&spec(3, &[("0", "0.5"), ("0", "0.5"), ("0.1", "0.2")])).unwrap();
        let iv = d.project_interval(2, &[0.4]).unwrap();
        assert!((iv.lo - 0.4).abs() < 1e-15 && (iv.hi - 0.5).abs() < 1e-15);
        for t in d.grid_enumerate(11) {
            assert!(t.0[2] >= 0.1 - 1e-12 && t.0[2] <= 0.2 + 1e-12);
            assert!(d.contains(&t, 1e-9));
        }
        assert!(!d.contains(&ThetaVector(vec![0.3, 0.3, 0.4]), 1e-9));
    }

    #[test]
    fn tail_truncation_examples() {
        let c: Vec<f64> = (1..=60).map(|i| 2f64.powi(-i)).collect();
        let zeros = vec![0.0; 60];
        let rem = 2f64.powi(-60);
        // sum_{i>=3} 2^-i = 0.25 is not < 0.25.
        assert_eq!(tail_truncation(&c, &zeros, rem, 0.25).unwrap(), 4);
        assert_eq!(tail_truncation(&c, &zeros, rem, 0.1).unwrap(), 5);
        assert_eq!(tail_truncation(&c, &zeros, rem, 2.0).unwrap(), 1);
        let c2 = [0.5, 0.0, 0.0];
        assert_eq!(tail_truncation(&c2, &[0.5, 0.0, 0.0], 0.0, 1e-9).unwrap(), 2);
        assert!(matches!(
            tail_truncation(&c, &zeros, 0.5, 0.1),
            Err(Error::NoSuchN { .. })
        ));
        assert!(tail_truncation(&c, &zeros, rem, 0.0).is_err());
    }

    #[test]
    fn convexity_probe_on_example_domains() {
        for d in [two_state(), three_state()] {
            let r = d.convexity_probe(9, 2000);
            assert!(r.checked > 0);
            assert_eq!(r.violations, 0, "{:?}", r.witness);
        }
        // Non-convex: upper bound convex in t1.
        let d = build_domain(&spec(3, &[("0", "0.5"), ("0", "2*(t1 - 0.25)*(t1 - 0.25)")])).unwrap();
        assert!(d.convexity_probe(9, 5000).violations > 0);
    }

    #[test]
    fn spec_json_round_trip_names() {
        let json = r#"{"n_states": 3, "bounds": [{"lower": "0", "upper": "0.5", "c": 0.5},
            {"lower": "0", "upper": "0.5 - t1", "c": 0.5}], "simplex_policy": "paper_faithful"}"#;
        let s: DomainSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s.simplex_policy, SimplexPolicy::PaperFaithful);
        assert_eq!(s.bounds[1].upper, "0.5 - t1");
        let d = build_domain(&s).unwrap();
        assert_eq!(d.policy(), SimplexPolicy::PaperFaithful);
    }
}
