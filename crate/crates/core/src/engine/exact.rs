//! Exact evaluation for affine bounds.
//!
//! With affine `lower_i`, `upper_i` the domain is a polytope in the free
//! coordinates and the linear objective attains its maximum at a vertex.
//! Vertices are enumerated as feasible solutions of `n - 1` linearly
//! independent tight constraints; ties go to the lexicographically smallest
//! weight vector.

use super::{finish, objective, tail_error, Method, RandomVariable, SublinearResult};
use crate::domain::{CredalDomain, SimplexPolicy};
use crate::error::{Error, Result};
use crate::expr::Affine;

/// Upper limit on candidate active sets before giving up.
const MAX_ACTIVE_SETS: u128 = 20_000_000;
const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;

/// A half-space `g . theta <= h` over the free coordinates.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Row {
    pub g: Vec<f64>,
    pub h: f64,
}

impl Row {
    fn slack(&self, theta: &[f64]) -> f64 {
        self.h - self.g.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>()
    }
}

pub(super) fn nested_exact(x: &RandomVariable, d: &CredalDomain) -> Result<SublinearResult> {
    let rows = constraint_rows(d)?;
    let (free, _) = best_vertex(x.values(), &rows, d.free_dims())?;
    Ok(finish(x, d.complete(&free), Method::NestedExact, tail_error(x, d)))
}

/// Half-spaces describing the domain, with exact duplicates removed.
pub(crate) fn constraint_rows(d: &CredalDomain) -> Result<Vec<Row>> {
    let dims = d.free_dims();
    let affine = |e: &crate::expr::Expr, what: &str, index: usize| -> Result<Affine> {
        e.affine_form(dims).ok_or_else(|| {
            Error::MethodUnsupported(format!(
                "nested_exact needs affine bounds; {what} bound {index} is `{}`",
                e.source()
            ))
        })
    };
    let enforce = d.policy() == SimplexPolicy::Enforce;
    let mut rows = Vec::new();
    for index in 1..=dims {
        let b = d.bound(index).expect("free coordinate has bounds");
        let l = affine(&b.lower, "lower", index)?;
        let u = affine(&b.upper, "upper", index)?;
        // theta_i >= l(theta): l.coeffs . theta - theta_i <= -l.constant
        let mut g = l.coeffs.clone();
        g[index - 1] -= 1.0;
        rows.push(Row { g, h: -l.constant });
        let mut g: Vec<f64> = u.coeffs.iter().map(|c| -c).collect();
        g[index - 1] += 1.0;
        rows.push(Row { g, h: u.constant });
        let lower_nonneg = l.coeffs.iter().all(|&c| c == 0.0) && l.constant >= 0.0;
        if enforce && !lower_nonneg {
            let mut g = vec![0.0; dims];
            g[index - 1] = -1.0;
            rows.push(Row { g, h: 0.0 });
        }
    }
    let mut residual_nonneg = false;
    if let Some(b) = d.residual_bound() {
        let l = affine(&b.lower, "lower", dims + 1)?;
        let u = affine(&b.upper, "upper", dims + 1)?;
        // 1 - sum(theta) >= l(theta)
        let g: Vec<f64> = l.coeffs.iter().map(|c| c + 1.0).collect();
        rows.push(Row { g, h: 1.0 - l.constant });
        // 1 - sum(theta) <= u(theta)
        let g: Vec<f64> = u.coeffs.iter().map(|c| -c - 1.0).collect();
        rows.push(Row { g, h: u.constant - 1.0 });
        residual_nonneg = l.coeffs.iter().all(|&c| c == 0.0) && l.constant >= 0.0;
    }
    if enforce && !residual_nonneg {
        rows.push(Row {
            g: vec![1.0; dims],
            h: 1.0,
        });
    }
    let mut unique: Vec<Row> = Vec::with_capacity(rows.len());
    for r in rows {
        if !unique.contains(&r) {
            unique.push(r);
        }
    }
    Ok(unique)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u128::MAX / 1024 {
            return u128::MAX;
        }
    }
    acc
}

/// Maximizes `objective(values, .)` over the vertices of `rows`.
/// Returns the free coordinates of the optimum and the indices of its tight rows.
pub(crate) fn best_vertex(values: &[f64], rows: &[Row], dims: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    let m = rows.len();
    let sets = binomial(m, dims);
    if sets > MAX_ACTIVE_SETS {
        return Err(Error::MethodUnsupported(format!(
            "nested_exact would examine {sets} active sets ({m} constraints, {dims} coordinates)"
        )));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut combo: Vec<usize> = (0..dims).collect();
    let mut a = vec![0.0; dims * dims];
    let mut rhs = vec![0.0; dims];
    loop {
        for (r, &ri) in combo.iter().enumerate() {
            a[r * dims..(r + 1) * dims].copy_from_slice(&rows[ri].g);
            rhs[r] = rows[ri].h;
        }
        if let Some(theta) = solve(&mut a, &mut rhs, dims) {
            if rows.iter().all(|row| row.slack(&theta) >= -FEAS_TOL * (1.0 + row.h.abs())) {
                let v = objective(values, &theta);
                let better = match &best {
                    None => true,
                    Some((bv, bt)) => v > bv + TIE_TOL || ((v - bv).abs() <= TIE_TOL && lex_less(&theta, bt)),
                };
                if better {
                    best = Some((v, theta));
                }
            }
        }
        if !next_combination(&mut combo, m) {
            break;
        }
    }
    let (_, theta) = best.ok_or_else(|| Error::InfeasibleDomain("the constraint polytope has no vertex".into()))?;
    let tight = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.slack(&theta).abs() <= 1e-9 * (1.0 + r.h.abs()))
        .map(|(i, _)| i)
        .collect();
    Ok((theta, tight))
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < &(y - TIE_TOL) {
            return true;
        }
        if x > &(y + TIE_TOL) {
            return false;
        }
    }
    false
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting; `a` is row-major `n x n`.
/// Both inputs are clobbered.
fn solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() < PIVOT_TOL {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
