//! Numerical check of the sublinear expectation axioms on supplied inputs.

use serde::Serialize;

use super::{upper_expectation_with, EngineOptions, Method, RandomVariable};
use crate::domain::CredalDomain;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomOutcome {
    pub axiom: &'static str,
    pub checked: usize,
    pub passed: bool,
    /// First failing instance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl AxiomOutcome {
    fn new(axiom: &'static str) -> Self {
        AxiomOutcome {
            axiom,
            checked: 0,
            passed: true,
            witness: None,
        }
    }

    fn record(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.passed {
            self.passed = false;
            self.witness = Some(witness());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub passed: bool,
    pub outcomes: Vec<AxiomOutcome>,
}

/// Checks monotonicity, constant preservation, sub-additivity and positive
/// homogeneity with the grid oracle at resolution 201.
pub fn axiom_check(d: &CredalDomain, xs: &[RandomVariable], lambdas: &[f64], tol: f64) -> Result<AxiomReport> {
    let opts = EngineOptions {
        grid_resolution: 201,
        ..EngineOptions::default()
    };
    axiom_check_with(d, xs, lambdas, tol, Method::Grid, &opts)
}

/// As [`axiom_check`] with an explicit evaluation method.
///
/// Monotonicity is checked on every pair `(X, max(X, Y))` and
/// `(min(X, Y), X)` as well as on supplied pairs that happen to be ordered.
pub fn axiom_check_with(
    d: &CredalDomain,
    xs: &[RandomVariable],
    lambdas: &[f64],
    tol: f64,
    method: Method,
    opts: &EngineOptions,
) -> Result<AxiomReport> {
    let e = |x: &RandomVariable| upper_expectation_with(x, d, method, opts).map(|r| r.value);
    let n = d.n_states();
    let mut mono = AxiomOutcome::new("monotonicity");
    let mut constant = AxiomOutcome::new("constant_preserving");
    let mut subadd = AxiomOutcome::new("sub_additivity");
    let mut homog = AxiomOutcome::new("positive_homogeneity");

    let ex: Vec<f64> = xs.iter().map(e).collect::<Result<_>>()?;
    for (i, x) in xs.iter().enumerate() {
        for c in [0.0, x.values()[0], -x.sup_norm()] {
            let v = e(&RandomVariable::constant(c, n))?;
            constant.record((v - c).abs() <= tol, || format!("E[{c}] = {v}"));
        }
        for &lambda in lambdas.iter().filter(|l| **l >= 0.0) {
            let v = e(&x.scale(lambda))?;
            let want = lambda * ex[i];
            homog.record((v - want).abs() <= tol, || {
                format!("X#{i}, lambda = {lambda}: E[lambda X] = {v}, lambda E[X] = {want}")
            });
        }
        for (j, y) in xs.iter().enumerate() {
            if i == j {
                continue;
            }
            if x.le(y) {
                mono.record(ex[i] <= ex[j] + tol, || format!("X#{i} <= X#{j} but {} > {}", ex[i], ex[j]));
            }
            if j < i {
                continue;
            }
            let sum = e(&x.zip_with(y, |a, b| a + b)?)?;
            subadd.record(sum <= ex[i] + ex[j] + tol, || {
                format!("X#{i}, X#{j}: E[X+Y] = {sum} > {} + {}", ex[i], ex[j])
            });
            let hi = e(&x.zip_with(y, f64::max)?)?;
            let lo = e(&x.zip_with(y, f64::min)?)?;
            mono.record(ex[i] <= hi + tol && ex[j] <= hi + tol, || {
                format!("X#{i}, X#{j}: E[max] = {hi} below {} or {}", ex[i], ex[j])
            });
            mono.record(lo <= ex[i] + tol && lo <= ex[j] + tol, || {
                format!("X#{i}, X#{j}: E[min] = {lo} above {} or {}", ex[i], ex[j])
            });
        }
    }
    let outcomes = vec![mono, constant, subadd, homog];
    Ok(AxiomReport {
        passed: outcomes.iter().all(|o| o.passed),
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SimplexPolicy;
    use crate::engine::tests::domain;

    #[test]
    fn two_state_pair() {
        let d = domain(2, &[("0.2", "0.5")], SimplexPolicy::Enforce);
        let xs = vec![
            RandomVariable::new(vec![3.0, 1.0]).unwrap(),
            RandomVariable::new(vec![1.0, 2.0]).unwrap(),
        ];
        let r = axiom_check(&d, &xs, &[0.0, 0.5, 2.0], 1e-9).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.outcomes[2].checked, 1);
        let sum = upper_expectation_with(
            &RandomVariable::new(vec![4.0, 3.0]).unwrap(),
            &d,
            Method::Grid,
            &EngineOptions::default(),
        )
        .unwrap();
        assert!((sum.value - 3.5).abs() < 1e-12);
    }

    #[test]
    fn constant_five() {
        let d = domain(3, &[("0", "0.5"), ("0", "0.5 - t1")], SimplexPolicy::Enforce);
        let r = axiom_check(&d, &[RandomVariable::constant(5.0, 3)], &[1.0], 1e-12).unwrap();
        assert!(r.passed);
    }
}
