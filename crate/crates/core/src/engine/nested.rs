//! Repeated one-dimensional maximization over the nested projection
//! intervals. The innermost free coordinate enters the objective linearly, so
//! its level is solved exactly at an endpoint.

use super::{finish, objective, objective_lipschitz, oracle, tail_error, EngineOptions, Method, RandomVariable, SublinearResult};
use crate::domain::CredalDomain;
use crate::error::{Error, Result};
use crate::search;
use crate::tol;

pub(super) fn nested_numeric(x: &RandomVariable, d: &CredalDomain, opts: &EngineOptions) -> Result<SublinearResult> {
    let mut s = Search {
        values: x.values(),
        d,
        scan: opts.scan_points,
        certified: true,
    };
    let mut prefix = Vec::with_capacity(d.free_dims());
    let found = s.level(1, &mut prefix);
    if !s.certified {
        let r = oracle::brute_force_oracle(x, d, opts.grid_resolution);
        if !r.value.is_finite() {
            return Err(Error::InfeasibleDomain(format!(
                "no grid point at resolution {}",
                opts.grid_resolution
            )));
        }
        return Ok(r);
    }
    let Some(_) = found else {
        return Err(Error::InfeasibleDomain("every branch of the nested search is empty".into()));
    };
    let free = s.argmax();
    let depth = d.free_dims().saturating_sub(1) as f64;
    let err = objective_lipschitz(x) * tol::GOLDEN_XTOL * depth + tail_error(x, d);
    Ok(finish(x, d.complete(&free), Method::NestedNumeric, err))
}

struct Search<'a> {
    values: &'a [f64],
    d: &'a CredalDomain,
    scan: usize,
    certified: bool,
}

impl Search<'_> {
    /// `V_index(prefix)`, or `None` when the branch is infeasible.
    fn level(&mut self, index: usize, prefix: &mut Vec<f64>) -> Option<f64> {
        self.best_at(index, prefix).map(|(_, v)| v)
    }

    /// Best coordinate and value at `index` for a fixed prefix.
    fn best_at(&mut self, index: usize, prefix: &mut Vec<f64>) -> Option<(f64, f64)> {
        let iv = self.d.project_interval(index, prefix).ok()?;
        if iv.is_empty() {
            return None;
        }
        if index == self.d.free_dims() {
            return Some(self.leaf(prefix, iv.lo, iv.hi));
        }
        let scan = self.scan;
        let m = search::maximize(
            |t| {
                prefix.push(t);
                let v = self.level(index + 1, prefix);
                prefix.pop();
                v.unwrap_or(f64::NEG_INFINITY)
            },
            iv.lo,
            iv.hi,
            scan,
        )?;
        if !m.certified {
            self.certified = false;
        }
        Some((m.x, m.value))
    }

    fn leaf(&self, prefix: &mut Vec<f64>, lo: f64, hi: f64) -> (f64, f64) {
        prefix.push(lo);
        let vlo = objective(self.values, prefix);
        prefix.pop();
        prefix.push(hi);
        let vhi = objective(self.values, prefix);
        prefix.pop();
        if vhi > vlo {
            (hi, vhi)
        } else {
            (lo, vlo)
        }
    }

    /// Re-descends along the best coordinate of every level.
    fn argmax(&mut self) -> Vec<f64> {
        let mut prefix = Vec::with_capacity(self.d.free_dims());
        for index in 1..=self.d.free_dims() {
            match self.best_at(index, &mut prefix) {
                Some((t, _)) => prefix.push(t),
                None => break,
            }
        }
        prefix
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SimplexPolicy;
    use crate::engine::tests::domain;

    fn rv(v: &[f64]) -> RandomVariable {
        RandomVariable::new(v.to_vec()).unwrap()
    }

    #[test]
    fn circle_upper_arc() {
        let d = domain(3, &[("0", "0.5"), ("0", "sqrt(t1*(0.5-t1)) + 0.25")], SimplexPolicy::Enforce);
        let r = nested_numeric(&rv(&[2.0, 2.0, 1.0]), &d, &EngineOptions::default()).unwrap();
        assert!((r.value - (6.0 + 2f64.sqrt()) / 4.0).abs() < 1e-6, "{}", r.value);
        assert_eq!(r.method, Method::NestedNumeric);
    }

    #[test]
    fn agrees_with_exact_on_mass_clamp() {
        let d = domain(3, &[("0", "1"), ("0", "0.6")], SimplexPolicy::Enforce);
        let r = nested_numeric(&rv(&[1.0, 2.0, 0.0]), &d, &EngineOptions::default()).unwrap();
        assert!((r.value - 1.6).abs() < 1e-8);
    }

    #[test]
    fn uncertified_level_falls_back_to_grid() {
        // V(t1) = |t1 - 0.5| dips in the middle of I_1.
        let d = domain(3, &[("0", "1"), ("0", "abs(t1 - 0.5)")], SimplexPolicy::PaperFaithful);
        let r = nested_numeric(&rv(&[0.0, 1.0, 0.0]), &d, &EngineOptions::default()).unwrap();
        assert_eq!(r.method, Method::Grid);
        assert!((r.value - 0.5).abs() < 1e-12);
    }
}
